#pragma once

#include <span>
#include <string>
#include <vector>

#include "ca/data.hpp"
#include "ca/network.hpp"

namespace ca {

// Rank-based AUROC (Mann-Whitney with midrank ties) under the
// "higher = more OOD" orientation: P(score_OOD > score_ID) + 0.5 P(tie).
double auroc(std::span<const double> scores, std::span<const char> is_ood);

// Equal-prior minimum of 0.5*(ID above threshold) + 0.5*(OOD at or below),
// swept over midpoints between adjacent distinct scores plus +/- infinity.
double detection_error(std::span<const double> scores, std::span<const char> is_ood);

struct EvalReport {
  std::string detector;
  std::string ood_name;
  double auroc = 0.0;
  double detection_error = 0.0;
  double id_accuracy = -1.0;  // negative = not applicable
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  std::string fingerprint;

  std::string to_text() const;          // key: value lines
  std::string csv_row() const;
  static std::string csv_header();
};

void save_report(const EvalReport& r, const std::string& path);

}  // namespace ca
