#include "ca/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ca/common.hpp"

namespace ca {

namespace {

void check_classes(std::span<const double> scores, std::span<const char> is_ood) {
  if (scores.size() != is_ood.size())
    throw std::invalid_argument("scores and is_ood must have equal length");
  bool any_id = false, any_ood = false;
  for (char f : is_ood) (f ? any_ood : any_id) = true;
  if (!any_id || !any_ood)
    throw std::invalid_argument("evaluation needs at least one ID and one OOD sample");
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const char> is_ood) {
  check_classes(scores, is_ood);
  std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // midranks over tie groups
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    double mid = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) rank[idx[k]] = mid;
    i = j;
  }
  double rank_sum_ood = 0.0;
  std::size_t n_ood = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (is_ood[k]) {
      rank_sum_ood += rank[k];
      ++n_ood;
    }
  std::size_t n_id = n - n_ood;
  double u = rank_sum_ood - 0.5 * static_cast<double>(n_ood) * static_cast<double>(n_ood + 1);
  return u / (static_cast<double>(n_id) * static_cast<double>(n_ood));
}

double detection_error(std::span<const double> scores, std::span<const char> is_ood) {
  check_classes(scores, is_ood);
  std::vector<double> id, ood;
  for (std::size_t k = 0; k < scores.size(); ++k)
    (is_ood[k] ? ood : id).push_back(scores[k]);

  std::vector<double> distinct(scores.begin(), scores.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<double> thresholds = {-std::numeric_limits<double>::infinity(),
                                    std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k + 1 < distinct.size(); ++k)
    thresholds.push_back(0.5 * (distinct[k] + distinct[k + 1]));

  double best = 1.0;
  for (double thr : thresholds) {
    double id_above = static_cast<double>(std::count_if(id.begin(), id.end(),
                                                        [&](double s) { return s > thr; })) /
                      static_cast<double>(id.size());
    double ood_below = static_cast<double>(std::count_if(ood.begin(), ood.end(),
                                                         [&](double s) { return s <= thr; })) /
                       static_cast<double>(ood.size());
    best = std::min(best, 0.5 * id_above + 0.5 * ood_below);
  }
  return best;
}

std::string EvalReport::to_text() const {
  std::string s;
  s += "detector: " + detector + "\n";
  s += "ood: " + ood_name + "\n";
  s += "auroc: " + fmt_double(auroc) + "\n";
  s += "detection_error: " + fmt_double(detection_error) + "\n";
  if (id_accuracy >= 0.0) s += "id_accuracy: " + fmt_double(id_accuracy) + "\n";
  s += "n_id: " + std::to_string(n_id) + "\n";
  s += "n_ood: " + std::to_string(n_ood) + "\n";
  if (!fingerprint.empty()) s += "fingerprint: " + fingerprint + "\n";
  return s;
}

std::string EvalReport::csv_header() {
  return "detector,ood,auroc,detection_error,id_accuracy,n_id,n_ood";
}

std::string EvalReport::csv_row() const {
  return detector + "," + ood_name + "," + fmt_double(auroc) + "," + fmt_double(detection_error) +
         "," + (id_accuracy >= 0.0 ? fmt_double(id_accuracy) : std::string("")) + "," +
         std::to_string(n_id) + "," + std::to_string(n_ood);
}

void save_report(const EvalReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << r.to_text();
}

}  // namespace ca
