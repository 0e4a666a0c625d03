#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pbbench/dgm.hpp"
#include "pbbench/nelder_mead.hpp"
#include "pbbench/stats.hpp"
#include "pbbench/store.hpp"

namespace pbbench {

inline constexpr double kSeFloor = 1e-12;
inline constexpr const char* kSeFloorNote = "se floored (zero residual variance)";

struct MethodSpec {
  std::string id;
  std::string version = "1.0.0";
  double alpha = 0.05;
  std::map<std::string, double> options;

  double option(const std::string& key, double fallback) const {
    auto it = options.find(key);
    return it == options.end() ? fallback : it->second;
  }
  bool has_option(const std::string& key) const { return options.count(key) != 0; }
};

struct Estimate {
  double estimate = 0;
  double se = 0;
  double ci_lower = 0;
  double ci_upper = 0;
  double p_value = 1;
  std::optional<double> df;
  std::map<std::string, double> aux;
  std::string note;  // set for degenerate-but-usable results (se floor, fallback)
};

// converged ⟺ est holds a value; note explains non-convergence or a degeneracy.
struct MethodOutcome {
  std::optional<Estimate> est;
  std::string note;

  bool converged() const { return est.has_value(); }
};

namespace detail {

// Fills CI and p from a t (df present) or normal reference; floors zero se.
inline Estimate finish_estimate(double estimate, double se, double alpha,
                                std::optional<double> df) {
  Estimate e;
  e.estimate = estimate;
  e.se = se;
  if (!(e.se > 0)) {
    e.se = kSeFloor;
    e.note = kSeFloorNote;
  }
  double q = df ? stats::t_quantile(1 - alpha / 2, *df) : stats::norm_quantile(1 - alpha / 2);
  e.ci_lower = e.estimate - q * e.se;
  e.ci_upper = e.estimate + q * e.se;
  double t = std::abs(e.estimate) / e.se;
  e.p_value = 2 * (df ? stats::t_sf(t, *df) : stats::norm_sf(t));
  e.df = df;
  return e;
}

inline MethodOutcome ok(Estimate e) {
  MethodOutcome o;
  o.note = e.note;
  o.est = std::move(e);
  return o;
}

inline MethodOutcome fail(std::string note) {
  MethodOutcome o;
  o.note = std::move(note);
  return o;
}

struct FitFe {
  double sw = 0;
  double estimate = 0;
  double q = 0;  // Cochran heterogeneity statistic
  double tau2_dl = 0;
};

inline FitFe fit_fixed_effect(const Dataset& ds) {
  FitFe f;
  double swy = 0, sw2 = 0;
  for (const auto& s : ds.studies) {
    double w = 1.0 / (s.sei * s.sei);
    f.sw += w;
    sw2 += w * w;
    swy += w * s.yi;
  }
  f.estimate = swy / f.sw;
  for (const auto& s : ds.studies) {
    double w = 1.0 / (s.sei * s.sei);
    double d = s.yi - f.estimate;
    f.q += w * d * d;
  }
  double k = static_cast<double>(ds.studies.size());
  double denom = f.sw - sw2 / f.sw;
  f.tau2_dl = denom > 0 ? std::max(0.0, (f.q - (k - 1)) / denom) : 0.0;
  return f;
}

struct FitRe {
  double estimate = 0;
  double se_kh = 0;
  double tau2 = 0;
};

inline FitRe fit_re_kh(const std::vector<Study>& studies) {
  Dataset tmp;
  tmp.studies = studies;
  auto fe = fit_fixed_effect(tmp);
  FitRe r;
  r.tau2 = fe.tau2_dl;
  double sw = 0, swy = 0;
  for (const auto& s : studies) {
    double w = 1.0 / (s.sei * s.sei + r.tau2);
    sw += w;
    swy += w * s.yi;
  }
  r.estimate = swy / sw;
  double rss = 0;
  for (const auto& s : studies) {
    double w = 1.0 / (s.sei * s.sei + r.tau2);
    double d = s.yi - r.estimate;
    rss += w * d * d;
  }
  double k = static_cast<double>(studies.size());
  r.se_kh = std::sqrt(rss / (k - 1) / sw);
  return r;
}

struct WlsLine {
  bool collinear = false;
  double b0 = 0, b1 = 0;
  double se_b0 = 0;
  double sigma2 = 0;  // weighted residual mean square
};

// Weighted regression of y on intercept + x via the 2x2 normal equations.
inline WlsLine fit_weighted_line(const Dataset& ds, const std::vector<double>& x) {
  double sw = 0, swx = 0, swxx = 0, swy = 0, swxy = 0;
  for (std::size_t i = 0; i < ds.studies.size(); ++i) {
    const auto& s = ds.studies[i];
    double w = 1.0 / (s.sei * s.sei);
    sw += w;
    swx += w * x[i];
    swxx += w * x[i] * x[i];
    swy += w * s.yi;
    swxy += w * x[i] * s.yi;
  }
  WlsLine f;
  double det = sw * swxx - swx * swx;
  if (!(det > 1e-12 * sw * swxx)) {
    f.collinear = true;
    return f;
  }
  f.b0 = (swxx * swy - swx * swxy) / det;
  f.b1 = (sw * swxy - swx * swy) / det;
  double rss = 0;
  for (std::size_t i = 0; i < ds.studies.size(); ++i) {
    const auto& s = ds.studies[i];
    double w = 1.0 / (s.sei * s.sei);
    double r = s.yi - f.b0 - f.b1 * x[i];
    rss += w * r * r;
  }
  f.sigma2 = rss / (ds.studies.size() - 2);
  f.se_b0 = std::sqrt(f.sigma2 * swxx / det);
  return f;
}

}  // namespace detail

// --- built-in estimators ----------------------------------------------------------

inline MethodOutcome est_mean(const Dataset& ds, const MethodSpec& spec) {
  std::vector<double> yi;
  yi.reserve(ds.studies.size());
  for (const auto& s : ds.studies) yi.push_back(s.yi);
  double k = static_cast<double>(yi.size());
  double se = stats::sample_sd(yi) / std::sqrt(k);
  return detail::ok(detail::finish_estimate(stats::mean(yi), se, spec.alpha, k - 1));
}

inline MethodOutcome est_fe(const Dataset& ds, const MethodSpec& spec) {
  auto f = detail::fit_fixed_effect(ds);
  return detail::ok(
      detail::finish_estimate(f.estimate, std::sqrt(1.0 / f.sw), spec.alpha, std::nullopt));
}

inline MethodOutcome est_re_kh(const Dataset& ds, const MethodSpec& spec) {
  auto r = detail::fit_re_kh(ds.studies);
  auto e = detail::finish_estimate(r.estimate, r.se_kh, spec.alpha,
                                   static_cast<double>(ds.studies.size()) - 1);
  e.aux["tau2_hat"] = r.tau2;
  return detail::ok(std::move(e));
}

inline MethodOutcome est_wls(const Dataset& ds, const MethodSpec& spec) {
  auto f = detail::fit_fixed_effect(ds);
  double k = static_cast<double>(ds.studies.size());
  double mse_w = 0;
  for (const auto& s : ds.studies) {
    double w = 1.0 / (s.sei * s.sei);
    double d = s.yi - f.estimate;
    mse_w += w * d * d;
  }
  mse_w /= k - 1;
  double se = std::sqrt(mse_w / f.sw);
  return detail::ok(detail::finish_estimate(f.estimate, se, spec.alpha, k - 1));
}

inline MethodOutcome est_pet(const Dataset& ds, const MethodSpec& spec) {
  std::vector<double> x;
  x.reserve(ds.studies.size());
  for (const auto& s : ds.studies) x.push_back(s.sei);
  auto f = detail::fit_weighted_line(ds, x);
  if (f.collinear) return detail::fail("regressor collinear");
  auto e = detail::finish_estimate(f.b0, f.se_b0, spec.alpha,
                                   static_cast<double>(ds.studies.size()) - 2);
  e.aux["slope"] = f.b1;
  return detail::ok(std::move(e));
}

inline MethodOutcome est_peese(const Dataset& ds, const MethodSpec& spec) {
  std::vector<double> x;
  x.reserve(ds.studies.size());
  for (const auto& s : ds.studies) x.push_back(s.sei * s.sei);
  auto f = detail::fit_weighted_line(ds, x);
  if (f.collinear) return detail::fail("regressor collinear");
  auto e = detail::finish_estimate(f.b0, f.se_b0, spec.alpha,
                                   static_cast<double>(ds.studies.size()) - 2);
  e.aux["slope"] = f.b1;
  return detail::ok(std::move(e));
}

inline MethodOutcome est_pet_peese(const Dataset& ds, const MethodSpec& spec) {
  auto pet = est_pet(ds, spec);
  if (!pet.converged()) return pet;
  double alpha_s = spec.option("pet_peese_switch_alpha", 0.05);
  double t = pet.est->estimate / pet.est->se;
  double p_one = stats::t_sf(t, static_cast<double>(ds.studies.size()) - 2);
  bool to_peese = p_one <= alpha_s;
  auto out = to_peese ? est_peese(ds, spec) : std::move(pet);
  if (out.converged()) out.est->aux["branch_peese"] = to_peese ? 1.0 : 0.0;
  return out;
}

inline MethodOutcome est_trim_fill(const Dataset& ds, const MethodSpec& spec) {
  const auto& orig = ds.studies;
  const int n = static_cast<int>(orig.size());

  // Study indices ordered by yi descending; the first L0 are the trim set.
  std::vector<int> by_y(n);
  std::iota(by_y.begin(), by_y.end(), 0);
  std::stable_sort(by_y.begin(), by_y.end(),
                   [&](int a, int b) { return orig[a].yi > orig[b].yi; });

  int l0 = 0;
  double center = 0;
  bool stable = false;
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<Study> trimmed;
    trimmed.reserve(n - l0);
    std::vector<bool> cut(n, false);
    for (int i = 0; i < l0; ++i) cut[by_y[i]] = true;
    for (int i = 0; i < n; ++i)
      if (!cut[i]) trimmed.push_back(orig[i]);
    center = detail::fit_re_kh(trimmed).estimate;

    // Midranks of |yi - center| over the original set.
    std::vector<int> by_dev(n);
    std::iota(by_dev.begin(), by_dev.end(), 0);
    std::stable_sort(by_dev.begin(), by_dev.end(), [&](int a, int b) {
      return std::abs(orig[a].yi - center) < std::abs(orig[b].yi - center);
    });
    std::vector<double> rank(n);
    for (int i = 0; i < n;) {
      int j = i;
      while (j + 1 < n && std::abs(orig[by_dev[j + 1]].yi - center) ==
                              std::abs(orig[by_dev[i]].yi - center))
        ++j;
      double mid = (i + j) / 2.0 + 1.0;
      for (int m = i; m <= j; ++m) rank[by_dev[m]] = mid;
      i = j + 1;
    }
    double t_sum = 0;
    for (int i = 0; i < n; ++i)
      if (orig[i].yi > center) t_sum += rank[i];

    long next = std::llround((4 * t_sum - n * (n + 1.0)) / (2 * n - 1.0));
    next = std::clamp(next, 0L, static_cast<long>(n - 2));
    if (static_cast<int>(next) == l0) {
      stable = true;
      break;
    }
    l0 = static_cast<int>(next);
  }
  if (!stable) return detail::fail("trim-fill unstable");

  std::vector<Study> augmented = orig;
  for (int i = 0; i < l0; ++i) {
    Study m = orig[by_y[i]];
    m.yi = 2 * center - m.yi;
    augmented.push_back(m);
  }
  auto r = detail::fit_re_kh(augmented);
  auto e = detail::finish_estimate(r.estimate, r.se_kh, spec.alpha,
                                   static_cast<double>(augmented.size()) - 1);
  e.aux["tau2_hat"] = r.tau2;
  e.aux["n_imputed"] = l0;
  e.aux["center"] = center;
  return detail::ok(std::move(e));
}

inline MethodOutcome est_sm_3p(const Dataset& ds, const MethodSpec& spec) {
  const auto& st = ds.studies;
  const std::size_t k = st.size();
  const bool fix_omega = spec.has_option("fix_omega");
  const double omega_fixed = spec.option("fix_omega", 1.0);

  std::vector<bool> sig(k);
  int n_sig = 0;
  for (std::size_t i = 0; i < k; ++i) {
    sig[i] = std::abs(st[i].yi) >= stats::kZ975 * st[i].sei;
    n_sig += sig[i];
  }
  if (!fix_omega && (n_sig < 2 || static_cast<int>(k) - n_sig < 2))
    return detail::fail("weights unidentified");

  // Optimize on data rescaled by the mean standard error; the likelihood is
  // scale-equivariant, and a unit-scale simplex keeps Nelder-Mead steps sane.
  double scale = 0;
  for (const auto& s : st) scale += s.sei;
  scale /= static_cast<double>(k);
  Dataset sc;
  sc.condition_id = ds.condition_id;
  sc.repetition = ds.repetition;
  sc.studies.reserve(k);
  for (const auto& s : st) sc.studies.push_back({s.yi / scale, s.sei / scale, s.n_total});
  const auto& zt = sc.studies;

  // Negative log-likelihood over (mu, log tau2[, log omega]); parameters are
  // clamped inside the evaluation so the simplex can roam freely.
  auto neg_ll = [&](const std::vector<double>& p) {
    double mu = p[0];
    double tau2 = std::exp(std::clamp(p[1], -34.5, 10.0));
    double omega = fix_omega ? omega_fixed : std::exp(std::clamp(p[2], -34.5, 34.5));
    double nll = 0;
    for (std::size_t i = 0; i < k; ++i) {
      double s2 = zt[i].sei * zt[i].sei + tau2;
      double s = std::sqrt(s2);
      double c = stats::kZ975 * zt[i].sei;
      double p_ns = stats::norm_cdf((c - mu) / s) - stats::norm_cdf((-c - mu) / s);
      double a = (1 - p_ns) + omega * p_ns;
      double z = (zt[i].yi - mu) / s;
      double ll = -0.5 * std::log(2 * M_PI) - 0.5 * z * z - std::log(s) - std::log(a);
      if (!sig[i]) ll += std::log(omega);
      nll -= ll;
    }
    return std::isfinite(nll) ? nll : 1e300;
  };

  auto fe = detail::fit_fixed_effect(sc);
  auto re = detail::fit_re_kh(zt);
  double lt0 = std::log(std::max(fe.tau2_dl, 1e-4));
  std::vector<std::vector<double>> starts;
  if (fix_omega) {
    starts = {{fe.estimate, lt0}, {re.estimate, lt0}, {0.0, std::log(1e-4)}};
  } else {
    starts = {{fe.estimate, lt0, 0.0},
              {re.estimate, lt0, std::log(0.3)},
              {0.0, std::log(1e-4), 0.0}};
  }
  NmResult best;
  best.fx = 1e301;
  for (const auto& s0 : starts) {
    auto r = nelder_mead(neg_ll, s0);
    if (r.fx < best.fx) best = r;
  }
  if (!std::isfinite(best.fx) || best.fx >= 1e300) return detail::fail("optimizer non-finite");

  double mu_hat = best.x[0];
  double tau2_hat = std::exp(std::clamp(best.x[1], -34.5, 10.0));
  double omega_hat =
      fix_omega ? omega_fixed : std::exp(std::clamp(best.x[2], -34.5, 34.5));

  // Observed information via central differences, with fallbacks dropping the
  // worst-identified coordinates.
  const std::size_t dim = best.x.size();
  std::vector<double> h(dim);
  for (std::size_t j = 0; j < dim; ++j) h[j] = 1e-4 * std::max(1.0, std::abs(best.x[j]));
  auto shifted = [&](std::vector<double> x, std::size_t j, double dir) {
    x[j] += dir * h[j];
    return x;
  };
  std::vector<std::vector<double>> hess(dim, std::vector<double>(dim, 0.0));
  double f0 = neg_ll(best.x);
  for (std::size_t i = 0; i < dim; ++i) {
    hess[i][i] = (neg_ll(shifted(best.x, i, 1)) - 2 * f0 + neg_ll(shifted(best.x, i, -1))) /
                 (h[i] * h[i]);
    for (std::size_t j = i + 1; j < dim; ++j) {
      auto pp = shifted(shifted(best.x, i, 1), j, 1);
      auto pm = shifted(shifted(best.x, i, 1), j, -1);
      auto mp = shifted(shifted(best.x, i, -1), j, 1);
      auto mm = shifted(shifted(best.x, i, -1), j, -1);
      hess[i][j] = hess[j][i] =
          (neg_ll(pp) - neg_ll(pm) - neg_ll(mp) + neg_ll(mm)) / (4 * h[i] * h[j]);
    }
  }

  auto var_mu_from = [&](const std::vector<std::size_t>& idx) -> double {
    std::size_t m = idx.size();
    if (m == 1) {
      double d = hess[idx[0]][idx[0]];
      return d > 0 ? 1.0 / d : -1.0;
    }
    if (m == 2) {
      double a = hess[idx[0]][idx[0]], b = hess[idx[0]][idx[1]], d = hess[idx[1]][idx[1]];
      double det = a * d - b * b;
      return det > 0 ? d / det : -1.0;
    }
    double a = hess[0][0], b = hess[0][1], c = hess[0][2];
    double d = hess[1][1], e = hess[1][2], f = hess[2][2];
    double det = a * (d * f - e * e) - b * (b * f - c * e) + c * (b * e - c * d);
    return det != 0 ? (d * f - e * e) / det : -1.0;
  };

  double var_mu = -1;
  if (dim == 3) {
    var_mu = var_mu_from({0, 1, 2});
    if (!(std::isfinite(var_mu) && var_mu > 0)) var_mu = var_mu_from({0, 2});
  } else {
    var_mu = var_mu_from({0, 1});
  }
  if (!(std::isfinite(var_mu) && var_mu > 0)) var_mu = var_mu_from({0});
  if (!(std::isfinite(var_mu) && var_mu > 0)) return detail::fail("optimizer non-finite");

  auto e = detail::finish_estimate(scale * mu_hat, scale * std::sqrt(var_mu),
                                   spec.alpha, std::nullopt);
  e.aux["tau2_hat"] = scale * scale * tau2_hat;
  e.aux["omega_hat"] = omega_hat;
  e.aux["log_lik"] = -best.fx - static_cast<double>(k) * std::log(scale);
  return detail::ok(std::move(e));
}

inline MethodOutcome est_waap_wls(const Dataset& ds, const MethodSpec& spec) {
  auto full = est_wls(ds, spec);
  double threshold = std::abs(full.est->estimate) / 2.8;
  Dataset adequate;
  adequate.condition_id = ds.condition_id;
  adequate.repetition = ds.repetition;
  for (const auto& s : ds.studies)
    if (s.sei <= threshold) adequate.studies.push_back(s);
  if (adequate.studies.size() < 2) {
    full.est->aux["n_adequate"] = static_cast<double>(adequate.studies.size());
    full.est->note = "fallback: <2 adequately powered";
    full.note = full.est->note;
    return full;
  }
  auto sub = est_wls(adequate, spec);
  sub.est->aux["n_adequate"] = static_cast<double>(adequate.studies.size());
  return sub;
}

// --- registry and runner -----------------------------------------------------------

struct MethodInfo {
  std::string id;
  std::string version;
  int min_k;
  MethodOutcome (*fn)(const Dataset&, const MethodSpec&);
};

inline const std::vector<MethodInfo>& method_registry() {
  static const std::vector<MethodInfo> reg = {
      {"mean", "1.0.0", 2, est_mean},
      {"fe", "1.0.0", 2, est_fe},
      {"re_kh", "1.0.0", 2, est_re_kh},
      {"wls", "1.0.0", 2, est_wls},
      {"pet", "1.0.0", 3, est_pet},
      {"peese", "1.0.0", 4, est_peese},
      {"pet_peese", "1.0.0", 4, est_pet_peese},
      {"trim_fill", "1.0.0", 3, est_trim_fill},
      {"sm_3p", "1.0.0", 4, est_sm_3p},
      {"waap_wls", "1.0.0", 3, est_waap_wls},
  };
  return reg;
}

inline const MethodInfo* find_method(const std::string& id) {
  for (const auto& m : method_registry())
    if (m.id == id) return &m;
  return nullptr;
}

inline std::vector<std::string> method_ids() {
  std::vector<std::string> ids;
  for (const auto& m : method_registry()) ids.push_back(m.id);
  return ids;
}

inline MethodOutcome apply_method(const Dataset& ds, const MethodSpec& spec) {
  const auto* info = find_method(spec.id);
  if (!info) raise(Errc::not_found, "unknown method '" + spec.id + "'");
  if (static_cast<int>(ds.studies.size()) < info->min_k)
    return detail::fail("InsufficientStudies");
  try {
    return info->fn(ds, spec);
  } catch (const Error& e) {
    return detail::fail(errc_name(e.code()));
  }
}

inline ResultRecord to_result_record(int repetition, const MethodOutcome& out) {
  ResultRecord r;
  r.repetition = repetition;
  r.note = out.note;
  if (out.converged()) {
    r.converged = true;
    r.estimate = out.est->estimate;
    r.se = out.est->se;
    r.ci_lower = out.est->ci_lower;
    r.ci_upper = out.est->ci_upper;
    r.p_value = out.est->p_value;
  }
  return r;
}

// Applies one method to every (condition, repetition) of a DGM and writes the
// per-condition result files. Existing files are kept unless force is set;
// returns the number written.
inline int run_method(const BenchStore& store, const std::string& dgm_id, const MethodSpec& spec,
                      int jobs = 1, bool force = false) {
  if (!find_method(spec.id)) raise(Errc::not_found, "unknown method '" + spec.id + "'");
  auto cids = store.condition_ids(dgm_id);
  std::vector<std::string> todo;
  for (const auto& cid : cids) {
    if (!fs::exists(store.data_path(dgm_id, cid)))
      raise(Errc::not_found, "no data file for condition '" + cid + "'");
    if (force || !fs::exists(store.results_path(dgm_id, spec.id, cid))) todo.push_back(cid);
  }
  if (!todo.empty()) fs::create_directories(store.results_dir(dgm_id, spec.id));

  parallel_for_index(todo.size(), jobs, [&](std::size_t i) {
    const auto& cid = todo[i];
    auto rows = read_data_csv(store.data_path(dgm_id, cid));
    std::map<int, std::vector<Study>> by_rep;
    for (const auto& row : rows)
      by_rep[row.repetition].push_back({row.yi, row.sei, row.n_total});
    std::vector<ResultRecord> records;
    records.reserve(by_rep.size());
    for (const auto& [rep, studies] : by_rep) {
      Dataset ds;
      ds.condition_id = cid;
      ds.repetition = rep;
      ds.studies = studies;
      records.push_back(to_result_record(rep, apply_method(ds, spec)));
    }
    write_results_csv(store.results_path(dgm_id, spec.id, cid), records);
  });
  return static_cast<int>(todo.size());
}

}  // namespace pbbench
