#pragma once

// SO2 error statistics, segmentation rates, SNR sweeps and learning curves.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "paoxi/grid.hpp"

namespace paoxi {

struct VesselError {
  int vessel_index = 0;   ///< 1-based, ordered by ground-truth SO2
  double gt_so2 = 0.0;
  std::size_t n_pixels = 0;
  double mean_abs_error = 0.0;
};

struct SO2ErrorStats {
  double mean_abs_error = 0.0;
  double median_abs_error = 0.0;
  std::size_t n_pixels = 0;
  std::size_t n_invalid = 0;   ///< mask pixels the predictor flagged invalid
  std::vector<VesselError> per_vessel;
  /// Unclamped estimates over mask pixels with a defined ratio, when the predictor has them.
  std::optional<double> raw_mean_abs_error;
  std::optional<double> raw_median_abs_error;
};

/// Median of the values (mean of the two central values for even counts).
double median_of(std::vector<double> values);

/// Collects absolute errors across many images; stats are pooled over pixels.
class SO2ErrorAccumulator {
 public:
  /// valid may be null (every prediction counts as valid).
  void add(const Image<double>& pred, const Mask* valid, const Image<float>& gt_so2,
           const Mask& gt_mask, const Image<double>* raw = nullptr);
  std::size_t size() const { return errors_.size(); }
  /// Throws ConfigError when no mask pixel was seen.
  SO2ErrorStats finish() const;

 private:
  std::vector<double> errors_;
  std::vector<float> gt_values_;
  std::vector<double> raw_errors_;
  bool all_raw_ = true;
  std::size_t invalid_ = 0;
};

SO2ErrorStats so2_error_stats(const Image<double>& pred, const Image<float>& gt_so2,
                              const Mask& gt_mask, const Mask* valid = nullptr);

struct SegRates {
  std::uint64_t tp = 0, fn = 0, fp = 0, tn = 0;

  /// Absent when the ground truth has no positives.
  std::optional<double> false_negative_rate() const;
  /// Absent when the ground truth has no negatives.
  std::optional<double> false_positive_rate() const;
  std::uint64_t total() const { return tp + fn + fp + tn; }
  SegRates& operator+=(const SegRates& o);
};

SegRates seg_rates(const Mask& pred, const Mask& gt);

inline constexpr double kDefaultSegThreshold = 0.5;

/// pixel >= threshold -> 1
Mask threshold_mask(const Image<double>& soft, double threshold = kDefaultSegThreshold);

// --- SNR sweep --------------------------------------------------------------

struct EvalCase {
  Image<double> pa_short;
  Image<double> pa_long;
  Image<float> gt_so2;
  Mask gt_mask;
};

struct Prediction {
  Image<double> so2;
  std::optional<Mask> valid;          ///< baseline validity, when known
  std::optional<Image<double>> so2_raw;  ///< unclamped estimate, NaN where undefined
  std::optional<Image<double>> seg;   ///< soft segmentation, when the predictor has one
};

using Predictor = std::function<Prediction(const EvalCase&)>;

struct SweepLevel {
  double snr_db = 0.0;
  std::vector<EvalCase> cases;
};

struct SweepRow {
  std::string method;
  double snr_db = 0.0;
  std::size_t n_samples = 0;
  SO2ErrorStats so2;
  std::optional<SegRates> seg;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::string> warnings;
};

inline const std::vector<double> kPaperSnrLevels{5.0, 10.0, 15.0, 20.0, 25.0};

/// Scores precomputed predictions for one SNR level (cases and predictions align).
SweepRow score_level(const std::string& method, double snr_db, const std::vector<EvalCase>& cases,
                     const std::vector<Prediction>& predictions,
                     double seg_threshold = kDefaultSegThreshold);

SweepResult snr_sweep(const std::vector<SweepLevel>& levels, const Predictor& predictor,
                      const std::string& method, double seg_threshold = kDefaultSegThreshold,
                      const std::vector<double>& expected_levels = kPaperSnrLevels);

/// True when median error does not rise by more than tolerance as SNR increases.
bool median_error_nonincreasing_in_snr(const std::vector<SweepRow>& rows, double tolerance);

/// CSV with the columns documented in docs/formats.md.
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string per_vessel_csv(const std::vector<SweepRow>& rows);

// --- learning curve ---------------------------------------------------------

struct LearningCurveFit {
  std::vector<double> train_sizes;
  std::vector<double> errors;
  double a = 0.0, b = 0.0, c = 0.0;  ///< y = a * N^-b + c
  double residual_norm = 0.0;
  bool degenerate = false;

  double evaluate(double n) const;
};

/// Least squares with (a, c) solved exactly for each exponent b.
/// Needs at least 4 points with strictly increasing N > 0.
LearningCurveFit learning_curve(const std::vector<double>& train_sizes,
                                const std::vector<double>& errors);

/// Residual norm of the best exponent on the initial grid (optimizer check).
double learning_curve_grid_residual(const std::vector<double>& train_sizes,
                                    const std::vector<double>& errors);

std::string learning_curve_csv(const LearningCurveFit& fit);

}  // namespace paoxi
