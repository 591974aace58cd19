#include "paoxi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "paoxi/error.hpp"

namespace paoxi {

double median_of(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

void SO2ErrorAccumulator::add(const Image<double>& pred, const Mask* valid,
                              const Image<float>& gt_so2, const Mask& gt_mask, const Image<double>* raw) {
  if (!pred.same_shape(gt_so2) || !pred.same_shape(gt_mask) || (valid && !pred.same_shape(*valid)) ||
      (raw && !pred.same_shape(*raw))) {
    throw ConfigError("prediction and ground truth shapes differ");
  }
  all_raw_ = all_raw_ && raw;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!gt_mask[i]) continue;
    // Invalid baseline pixels already hold their clamped value; they are
    // scored like any other pixel and counted separately.
    errors_.push_back(std::abs(pred[i] - static_cast<double>(gt_so2[i])));
    gt_values_.push_back(gt_so2[i]);
    if (valid && !(*valid)[i]) ++invalid_;
    if (raw && std::isfinite((*raw)[i])) raw_errors_.push_back(std::abs((*raw)[i] - static_cast<double>(gt_so2[i])));
  }
}

SO2ErrorStats SO2ErrorAccumulator::finish() const {
  if (errors_.empty()) throw ConfigError("ground-truth vessel mask is empty");
  SO2ErrorStats s;
  s.n_pixels = errors_.size();
  s.n_invalid = invalid_;
  double sum = 0.0;
  for (double e : errors_) sum += e;
  s.mean_abs_error = sum / static_cast<double>(errors_.size());
  s.median_abs_error = median_of(errors_);
  if (all_raw_ && !raw_errors_.empty()) {
    double raw_sum = 0.0;
    for (double e : raw_errors_) raw_sum += e;
    s.raw_mean_abs_error = raw_sum / static_cast<double>(raw_errors_.size());
    s.raw_median_abs_error = median_of(raw_errors_);
  }

  std::map<float, std::pair<std::size_t, double>> groups;
  for (std::size_t i = 0; i < errors_.size(); ++i) {
    auto& g = groups[gt_values_[i]];
    ++g.first;
    g.second += errors_[i];
  }
  int idx = 0;
  for (const auto& [so2, g] : groups) {
    s.per_vessel.push_back({++idx, so2, g.first, g.second / static_cast<double>(g.first)});
  }
  return s;
}

SO2ErrorStats so2_error_stats(const Image<double>& pred, const Image<float>& gt_so2,
                              const Mask& gt_mask, const Mask* valid) {
  SO2ErrorAccumulator acc;
  acc.add(pred, valid, gt_so2, gt_mask);
  return acc.finish();
}

std::optional<double> SegRates::false_negative_rate() const {
  if (fn + tp == 0) return std::nullopt;
  return static_cast<double>(fn) / static_cast<double>(fn + tp);
}

std::optional<double> SegRates::false_positive_rate() const {
  if (fp + tn == 0) return std::nullopt;
  return static_cast<double>(fp) / static_cast<double>(fp + tn);
}

SegRates& SegRates::operator+=(const SegRates& o) {
  tp += o.tp;
  fn += o.fn;
  fp += o.fp;
  tn += o.tn;
  return *this;
}

SegRates seg_rates(const Mask& pred, const Mask& gt) {
  if (!pred.same_shape(gt)) throw ConfigError("segmentation shapes differ");
  SegRates r;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool t = gt[i] != 0;
    if (t && p) ++r.tp;
    else if (t) ++r.fn;
    else if (p) ++r.fp;
    else ++r.tn;
  }
  return r;
}

Mask threshold_mask(const Image<double>& soft, double threshold) {
  Mask m(soft.rows(), soft.cols());
  for (std::size_t i = 0; i < soft.size(); ++i) m[i] = soft[i] >= threshold ? 1 : 0;
  return m;
}

SweepRow score_level(const std::string& method, double snr_db, const std::vector<EvalCase>& cases,
                     const std::vector<Prediction>& predictions, double seg_threshold) {
  if (cases.size() != predictions.size()) throw ConfigError("cases and predictions differ in count");
  SweepRow row;
  row.method = method;
  row.snr_db = snr_db;
  row.n_samples = cases.size();
  SO2ErrorAccumulator acc;
  SegRates seg;
  bool have_seg = !cases.empty();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const auto& p = predictions[i];
    acc.add(p.so2, p.valid ? &*p.valid : nullptr, c.gt_so2, c.gt_mask, p.so2_raw ? &*p.so2_raw : nullptr);
    if (p.seg) {
      if (!p.seg->same_shape(c.gt_mask)) throw ConfigError("segmentation shape differs from ground truth");
      seg += seg_rates(threshold_mask(*p.seg, seg_threshold), c.gt_mask);
    } else {
      have_seg = false;
    }
  }
  row.so2 = acc.finish();
  if (have_seg) row.seg = seg;
  return row;
}

SweepResult snr_sweep(const std::vector<SweepLevel>& levels, const Predictor& predictor,
                      const std::string& method, double seg_threshold,
                      const std::vector<double>& expected_levels) {
  SweepResult out;
  for (double want : expected_levels) {
    const bool present = std::any_of(levels.begin(), levels.end(),
                                     [&](const SweepLevel& l) { return l.snr_db == want; });
    if (!present) {
      std::ostringstream ss;
      ss << "missing SNR level " << want << " dB";
      out.warnings.push_back(ss.str());
    }
  }
  for (const auto& level : levels) {
    std::vector<Prediction> preds;
    preds.reserve(level.cases.size());
    for (const auto& c : level.cases) preds.push_back(predictor(c));
    std::size_t vessel_pixels = 0;
    for (const auto& c : level.cases)
      for (auto m : c.gt_mask.storage()) vessel_pixels += m != 0;
    if (vessel_pixels == 0) {
      std::ostringstream ss;
      ss << "no vessel pixels at " << level.snr_db << " dB";
      out.warnings.push_back(ss.str());
      continue;
    }
    out.rows.push_back(score_level(method, level.snr_db, level.cases, preds, seg_threshold));
  }
  std::stable_sort(out.rows.begin(), out.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.snr_db < b.snr_db; });
  return out;
}

bool median_error_nonincreasing_in_snr(const std::vector<SweepRow>& rows, double tolerance) {
  std::map<std::string, std::vector<const SweepRow*>> by_method;
  for (const auto& r : rows) by_method[r.method].push_back(&r);
  for (auto& [m, rs] : by_method) {
    std::sort(rs.begin(), rs.end(), [](auto* a, auto* b) { return a->snr_db < b->snr_db; });
    for (std::size_t i = 1; i < rs.size(); ++i) {
      if (rs[i]->so2.median_abs_error > rs[i - 1]->so2.median_abs_error + tolerance) return false;
    }
  }
  return true;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream ss;
  ss << "method,snr_db,n_samples,n_pixels,n_invalid,mean_abs_error,median_abs_error,"
        "fn_rate,fp_rate,tp,fn,fp,tn,raw_mean_abs_error,raw_median_abs_error\n";
  for (const auto& r : rows) {
    ss << r.method << ',' << fmt(r.snr_db) << ',' << r.n_samples << ',' << r.so2.n_pixels << ','
       << r.so2.n_invalid << ',' << fmt(r.so2.mean_abs_error) << ','
       << fmt(r.so2.median_abs_error) << ',';
    if (r.seg) {
      ss << fmt_opt(r.seg->false_negative_rate()) << ',' << fmt_opt(r.seg->false_positive_rate())
         << ',' << r.seg->tp << ',' << r.seg->fn << ',' << r.seg->fp << ',' << r.seg->tn;
    } else {
      ss << ",,,,,";
    }
    ss << ',' << fmt_opt(r.so2.raw_mean_abs_error) << ',' << fmt_opt(r.so2.raw_median_abs_error) << '\n';
  }
  return ss.str();
}

std::string per_vessel_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream ss;
  ss << "method,snr_db,vessel_index,gt_so2,n_pixels,mean_abs_error\n";
  for (const auto& r : rows) {
    for (const auto& v : r.so2.per_vessel) {
      ss << r.method << ',' << fmt(r.snr_db) << ',' << v.vessel_index << ',' << fmt(v.gt_so2)
         << ',' << v.n_pixels << ',' << fmt(v.mean_abs_error) << '\n';
    }
  }
  return ss.str();
}

// --- learning curve ---------------------------------------------------------

namespace {

struct LinearFit {
  double a = 0.0, c = 0.0, sse = 0.0;
};

// Least squares of y on (x, 1).
LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  if (sxx > 0.0 && sxx > 1e-28 * mx * mx * n) {
    f.a = sxy / sxx;
    f.c = my - f.a * mx;
  } else {
    f.c = my;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.a * x[i] + f.c);
    f.sse += r * r;
  }
  return f;
}

LinearFit fit_for_exponent(double b, const std::vector<double>& n, const std::vector<double>& y) {
  std::vector<double> x(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) x[i] = std::pow(n[i], -b);
  return fit_linear(x, y);
}

constexpr double kMinExponent = 1e-3;
constexpr double kMaxExponent = 5.0;
constexpr int kGridPoints = 241;

std::vector<double> exponent_grid() {
  std::vector<double> g(kGridPoints);
  const double lo = std::log(kMinExponent), hi = std::log(kMaxExponent);
  for (int i = 0; i < kGridPoints; ++i) g[i] = std::exp(lo + (hi - lo) * i / (kGridPoints - 1));
  return g;
}

void check_curve_inputs(const std::vector<double>& n, const std::vector<double>& y) {
  if (n.size() != y.size()) throw ConfigError("train sizes and errors differ in length");
  if (n.size() < 4) throw ConfigError("learning curve needs at least 4 points");
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(n[i] > 0.0) || !std::isfinite(y[i])) throw ConfigError("learning curve points must be finite with N > 0");
    if (i > 0 && !(n[i] > n[i - 1])) throw ConfigError("training sizes must be strictly increasing");
  }
}

}  // namespace

double LearningCurveFit::evaluate(double n) const { return a * std::pow(n, -b) + c; }

double learning_curve_grid_residual(const std::vector<double>& n, const std::vector<double>& y) {
  check_curve_inputs(n, y);
  double best = std::numeric_limits<double>::infinity();
  for (double b : exponent_grid()) best = std::min(best, fit_for_exponent(b, n, y).sse);
  return std::sqrt(best);
}

LearningCurveFit learning_curve(const std::vector<double>& n, const std::vector<double>& y) {
  check_curve_inputs(n, y);
  LearningCurveFit fit;
  fit.train_sizes = n;
  fit.errors = y;

  const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
  if (*hi_it - *lo_it <= 1e-15 * std::max(1.0, std::abs(*hi_it))) {
    fit.c = y.front();
    fit.degenerate = true;
    return fit;
  }

  const auto grid = exponent_grid();
  std::size_t best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double sse = fit_for_exponent(grid[i], n, y).sse;
    if (sse < best_sse) {
      best_sse = sse;
      best = i;
    }
  }
  const double lo = grid[best > 0 ? best - 1 : 0];
  const double hi = grid[std::min(best + 1, grid.size() - 1)];
  const auto objective = [&](double b) { return fit_for_exponent(b, n, y).sse; };
  const auto [b_opt, sse_opt] = boost::math::tools::brent_find_minima(
      objective, lo, hi, std::numeric_limits<double>::digits);
  const double b_final = sse_opt <= best_sse ? b_opt : grid[best];

  const LinearFit lf = fit_for_exponent(b_final, n, y);
  fit.a = lf.a;
  fit.b = b_final;
  fit.c = lf.c;
  fit.residual_norm = std::sqrt(lf.sse);
  fit.degenerate = std::abs(fit.a) <= 1e-12 * std::max(1.0, std::abs(fit.c));
  return fit;
}

std::string learning_curve_csv(const LearningCurveFit& fit) {
  std::ostringstream ss;
  ss << "train_size,median_error,fitted_error\n";
  for (std::size_t i = 0; i < fit.train_sizes.size(); ++i) {
    ss << fmt(fit.train_sizes[i]) << ',' << fmt(fit.errors[i]) << ','
       << fmt(fit.evaluate(fit.train_sizes[i])) << '\n';
  }
  ss << "# fit a=" << fmt(fit.a) << " b=" << fmt(fit.b) << " c=" << fmt(fit.c)
     << " residual_norm=" << fmt(fit.residual_norm) << " degenerate=" << (fit.degenerate ? 1 : 0)
     << '\n';
  return ss.str();
}

}  // namespace paoxi
