#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "pbbench/estimators.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace pbbench;
using Catch::Approx;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using pbtest::TempDir;

namespace {

Dataset mk_ds(std::vector<double> yi, std::vector<double> sei) {
  Dataset ds;
  ds.condition_id = "c";
  ds.repetition = 1;
  for (std::size_t i = 0; i < yi.size(); ++i)
    ds.studies.push_back({yi[i], sei[i], 20});
  return ds;
}

MethodSpec spec(std::string id) {
  MethodSpec s;
  s.id = std::move(id);
  return s;
}

// Random dataset with sei in [0.05, 0.45) and yi in mu +- 0.5.
Dataset random_ds(Rng& rng, int k, double mu = 0.1) {
  std::vector<double> yi, sei;
  for (int i = 0; i < k; ++i) {
    yi.push_back(mu + (rng.uniform01() - 0.5));
    sei.push_back(0.05 + 0.4 * rng.uniform01());
  }
  return mk_ds(yi, sei);
}

double fe_oracle(const Dataset& ds) {
  long double sw = 0, swy = 0;
  for (const auto& s : ds.studies) {
    long double w = 1.0L / ((long double)s.sei * s.sei);
    sw += w;
    swy += w * s.yi;
  }
  return (double)(swy / sw);
}

}  // namespace

TEST_CASE("unweighted mean") {
  auto out = est_mean(mk_ds({0.1, 0.2, 0.3}, {0.1, 0.1, 0.1}), spec("mean"));
  REQUIRE(out.converged());
  const auto& e = *out.est;
  double se = 0.1 / std::sqrt(3.0);
  CHECK_THAT(e.estimate, WithinAbs(0.2, 1e-10));
  CHECK_THAT(e.se, WithinAbs(se, 1e-10));
  REQUIRE(e.df);
  CHECK(*e.df == 2.0);
  double q = stats::t_quantile(0.975, 2);
  CHECK_THAT(e.ci_lower, WithinAbs(0.2 - q * se, 1e-10));
  CHECK_THAT(e.ci_upper, WithinAbs(0.2 + q * se, 1e-10));
  CHECK_THAT(e.p_value, WithinAbs(2 * stats::t_sf(0.2 / se, 2), 1e-12));

  SECTION("identical values floor the se") {
    auto deg = est_mean(mk_ds({0.5, 0.5, 0.5}, {0.1, 0.1, 0.1}), spec("mean"));
    REQUIRE(deg.converged());
    CHECK(deg.est->se == kSeFloor);
    CHECK(deg.est->note == kSeFloorNote);
    CHECK(deg.note == kSeFloorNote);
    CHECK_THAT(deg.est->estimate, WithinAbs(0.5, 1e-15));
  }
}

TEST_CASE("fixed effect") {
  auto out = est_fe(mk_ds({0.0, 1.0}, {0.5, 1.0}), spec("fe"));
  REQUIRE(out.converged());
  const auto& e = *out.est;
  CHECK_THAT(e.estimate, WithinAbs(0.2, 1e-12));
  CHECK_THAT(e.se, WithinAbs(1.0 / std::sqrt(5.0), 1e-12));
  CHECK_FALSE(e.df);  // normal reference
  double q = stats::norm_quantile(0.975);
  CHECK_THAT(e.ci_lower, WithinAbs(0.2 - q * e.se, 1e-12));
  CHECK_THAT(e.ci_upper, WithinAbs(0.2 + q * e.se, 1e-12));
  CHECK_THAT(e.p_value, WithinAbs(2 * stats::norm_sf(0.2 / e.se), 1e-12));

  SECTION("equal sei reduces to the plain mean") {
    Rng rng(derive_seed({21, "t", "fe-mean", 1}));
    for (int i = 0; i < 200; ++i) {
      auto ds = random_ds(rng, 2 + (int)rng.pick_index(8));
      for (auto& s : ds.studies) s.sei = 0.2;
      auto fe = est_fe(ds, spec("fe"));
      std::vector<double> yi;
      for (const auto& s : ds.studies) yi.push_back(s.yi);
      CHECK_THAT(fe.est->estimate, WithinAbs(stats::mean(yi), 1e-12));
    }
  }
}

TEST_CASE("random effects with kh adjustment") {
  double s = std::sqrt(0.5);
  auto out = est_re_kh(mk_ds({-1.0, 1.0}, {s, s}), spec("re_kh"));
  REQUIRE(out.converged());
  const auto& e = *out.est;
  CHECK_THAT(e.aux.at("tau2_hat"), WithinAbs(1.5, 1e-10));
  CHECK_THAT(e.estimate, WithinAbs(0.0, 1e-12));
  CHECK_THAT(e.se, WithinAbs(1.0, 1e-10));
  REQUIRE(e.df);
  CHECK(*e.df == 1.0);
  CHECK_THAT(e.ci_upper, WithinAbs(stats::t_quantile(0.975, 1), 1e-8));
  CHECK_THAT(e.p_value, WithinAbs(1.0, 1e-12));

  SECTION("homogeneous data collapses to fixed effect point estimate") {
    auto ds = mk_ds({0.48, 0.5, 0.52}, {1.0, 1.0, 1.0});
    auto re = est_re_kh(ds, spec("re_kh"));
    CHECK(re.est->aux.at("tau2_hat") == 0.0);
    CHECK_THAT(re.est->estimate, WithinAbs(est_fe(ds, spec("fe")).est->estimate, 1e-14));
  }

  SECTION("tau2 zero with equal sei matches the mean estimator") {
    Rng rng(derive_seed({22, "t", "kh-mean", 1}));
    for (int i = 0; i < 100; ++i) {
      int k = 3 + (int)rng.pick_index(8);
      std::vector<double> yi, sei;
      for (int j = 0; j < k; ++j) {
        yi.push_back(0.6 * (rng.uniform01() - 0.5));  // spread too small for Q > k-1
        sei.push_back(1.0);
      }
      auto ds = mk_ds(yi, sei);
      auto re = est_re_kh(ds, spec("re_kh"));
      auto mn = est_mean(ds, spec("mean"));
      REQUIRE(re.est->aux.at("tau2_hat") == 0.0);
      CHECK_THAT(re.est->estimate, WithinAbs(mn.est->estimate, 1e-10));
      CHECK_THAT(re.est->se, WithinAbs(mn.est->se, 1e-10));
      CHECK(*re.est->df == *mn.est->df);
      CHECK_THAT(re.est->ci_lower, WithinAbs(mn.est->ci_lower, 1e-10));
    }
  }
}

TEST_CASE("wls") {
  auto out = est_wls(mk_ds({0.0, 1.0}, {0.5, 1.0}), spec("wls"));
  REQUIRE(out.converged());
  const auto& e = *out.est;
  CHECK_THAT(e.estimate, WithinAbs(0.2, 1e-12));
  CHECK_THAT(e.se, WithinAbs(0.4, 1e-12));  // se_fe * sqrt(MSE_w), MSE_w = 0.8
  REQUIRE(e.df);
  CHECK(*e.df == 1.0);

  SECTION("point estimate always equals fixed effect") {
    Rng rng(derive_seed({23, "t", "wls-fe", 1}));
    for (int i = 0; i < 2000; ++i) {
      auto ds = random_ds(rng, 2 + (int)rng.pick_index(10));
      auto fe = est_fe(ds, spec("fe"));
      auto wls = est_wls(ds, spec("wls"));
      CHECK_THAT(wls.est->estimate, WithinRel(fe.est->estimate, 1e-12));
    }
  }
}

TEST_CASE("dl truncation") {
  Rng rng(derive_seed({24, "t", "dl", 1}));
  for (int i = 0; i < 2000; ++i) {
    auto ds = random_ds(rng, 2 + (int)rng.pick_index(10));
    auto re = est_re_kh(ds, spec("re_kh"));
    double tau2 = re.est->aux.at("tau2_hat");
    CHECK(tau2 >= 0.0);

    long double est = fe_oracle(ds), q = 0;
    for (const auto& s : ds.studies) {
      long double d = s.yi - est;
      q += d * d / ((long double)s.sei * s.sei);
    }
    double k = static_cast<double>(ds.studies.size());
    if ((double)q <= k - 1 + 1e-9)
      CHECK(tau2 == 0.0);
    else
      CHECK(tau2 > 0.0);
  }
}

TEST_CASE("pet") {
  SECTION("exact linear funnel has zero intercept") {
    auto out = est_pet(mk_ds({0.1, 0.2, 0.3}, {0.1, 0.2, 0.3}), spec("pet"));
    REQUIRE(out.converged());
    CHECK_THAT(out.est->estimate, WithinAbs(0.0, 1e-12));
    CHECK_THAT(out.est->aux.at("slope"), WithinAbs(1.0, 1e-10));
    CHECK(out.est->se < 1e-7);
    REQUIRE(out.est->df);
    CHECK(*out.est->df == 1.0);
  }

  SECTION("equal standard errors are collinear with the intercept") {
    auto out = est_pet(mk_ds({0.1, 0.2, 0.3}, {0.2, 0.2, 0.2}), spec("pet"));
    CHECK_FALSE(out.converged());
    CHECK(out.note == "regressor collinear");
  }

  SECTION("matches the normal-equations oracle") {
    Rng rng(derive_seed({25, "t", "pet-oracle", 1}));
    for (int i = 0; i < 500; ++i) {
      auto ds = random_ds(rng, 4 + (int)rng.pick_index(10));
      std::vector<double> y, se, x;
      for (const auto& s : ds.studies) {
        y.push_back(s.yi);
        se.push_back(s.sei);
        x.push_back(s.sei);
      }
      auto want = pbtest::wls_line_oracle(y, se, x);
      auto out = est_pet(ds, spec("pet"));
      REQUIRE(out.converged());
      CHECK_THAT(out.est->estimate, WithinAbs(want.b0, 1e-10));
      CHECK_THAT(out.est->aux.at("slope"), WithinAbs(want.b1, 1e-9));
      CHECK_THAT(out.est->se, WithinAbs(want.se_b0, 1e-10));
    }
  }
}

TEST_CASE("peese") {
  SECTION("exact quadratic funnel has zero intercept") {
    std::vector<double> sei{0.1, 0.2, 0.3, 0.25};
    std::vector<double> yi;
    for (double s : sei) yi.push_back(s * s);
    auto out = est_peese(mk_ds(yi, sei), spec("peese"));
    REQUIRE(out.converged());
    CHECK_THAT(out.est->estimate, WithinAbs(0.0, 1e-12));
    CHECK_THAT(out.est->aux.at("slope"), WithinAbs(1.0, 1e-8));
  }

  SECTION("matches the normal-equations oracle") {
    Rng rng(derive_seed({26, "t", "peese-oracle", 1}));
    for (int i = 0; i < 500; ++i) {
      auto ds = random_ds(rng, 4 + (int)rng.pick_index(10));
      std::vector<double> y, se, x;
      for (const auto& s : ds.studies) {
        y.push_back(s.yi);
        se.push_back(s.sei);
        x.push_back(s.sei * s.sei);
      }
      auto want = pbtest::wls_line_oracle(y, se, x);
      auto out = est_peese(ds, spec("peese"));
      REQUIRE(out.converged());
      CHECK_THAT(out.est->estimate, WithinAbs(want.b0, 1e-10));
      CHECK_THAT(out.est->se, WithinAbs(want.se_b0, 1e-10));
    }
  }
}

TEST_CASE("pet-peese switch") {
  Rng rng(derive_seed({27, "t", "petpeese", 1}));
  int took_peese = 0, took_pet = 0;
  for (int i = 0; i < 400; ++i) {
    auto ds = random_ds(rng, 4 + (int)rng.pick_index(10), 0.3 * rng.uniform01());
    auto pet = est_pet(ds, spec("pet"));
    auto combined = est_pet_peese(ds, spec("pet_peese"));
    if (!pet.converged()) {
      CHECK_FALSE(combined.converged());
      continue;
    }
    double df = static_cast<double>(ds.studies.size()) - 2;
    bool to_peese = stats::t_sf(pet.est->estimate / pet.est->se, df) <= 0.05;
    (to_peese ? took_peese : took_pet)++;
    REQUIRE(combined.converged());
    CHECK(combined.est->aux.at("branch_peese") == (to_peese ? 1.0 : 0.0));
    auto expected = to_peese ? est_peese(ds, spec("peese")) : std::move(pet);
    CHECK(combined.est->estimate == expected.est->estimate);
    CHECK(combined.est->se == expected.est->se);
    CHECK(combined.est->p_value == expected.est->p_value);
  }
  CHECK(took_peese > 20);  // both branches exercised
  CHECK(took_pet > 20);

  SECTION("switch threshold is configurable") {
    auto ds = random_ds(rng, 8, 0.2);
    auto strict = spec("pet_peese");
    strict.options["pet_peese_switch_alpha"] = 1.0;  // always PEESE
    auto out = est_pet_peese(ds, strict);
    REQUIRE(out.converged());
    CHECK(out.est->aux.at("branch_peese") == 1.0);
    auto lax = spec("pet_peese");
    lax.options["pet_peese_switch_alpha"] = 0.0;  // never
    out = est_pet_peese(ds, lax);
    REQUIRE(out.converged());
    CHECK(out.est->aux.at("branch_peese") == 0.0);
  }
}

TEST_CASE("trim and fill") {
  SECTION("symmetric funnel imputes nothing") {
    auto out = est_trim_fill(mk_ds({-0.2, 0.0, 0.2}, {0.1, 0.1, 0.1}), spec("trim_fill"));
    REQUIRE(out.converged());
    CHECK(out.est->aux.at("n_imputed") == 0.0);
    CHECK_THAT(out.est->estimate, WithinAbs(0.0, 1e-10));
  }

  SECTION("augmented set equals a direct random-effects fit") {
    Rng rng(derive_seed({28, "t", "tf-comp", 1}));
    int with_imputed = 0;
    for (int i = 0; i < 300; ++i) {
      auto ds = random_ds(rng, 6 + (int)rng.pick_index(10), 0.4 * rng.uniform01());
      auto out = est_trim_fill(ds, spec("trim_fill"));
      if (!out.converged()) continue;
      int l0 = (int)out.est->aux.at("n_imputed");
      double center = out.est->aux.at("center");
      if (l0 > 0) ++with_imputed;

      const auto& orig = ds.studies;
      int n = (int)orig.size();
      std::vector<int> by_y(n);
      std::iota(by_y.begin(), by_y.end(), 0);
      std::stable_sort(by_y.begin(), by_y.end(),
                       [&](int a, int b) { return orig[a].yi > orig[b].yi; });
      std::vector<Study> augmented = orig;
      for (int j = 0; j < l0; ++j) {
        Study m = orig[by_y[j]];
        m.yi = 2 * center - m.yi;
        augmented.push_back(m);
      }
      Dataset aug;
      aug.studies = augmented;
      auto direct = est_re_kh(aug, spec("re_kh"));
      CHECK(out.est->estimate == direct.est->estimate);
      CHECK(out.est->se == direct.est->se);
      CHECK(out.est->aux.at("tau2_hat") == direct.est->aux.at("tau2_hat"));
      CHECK(*out.est->df == *direct.est->df);
    }
    CHECK(with_imputed > 30);
  }

  SECTION("one-sided funnel imputes and shrinks toward zero") {
    // Small precise effects plus large imprecise ones: classic asymmetry.
    auto ds = mk_ds({0.05, 0.1, 0.12, 0.15, 0.8, 0.9, 1.0},
                    {0.08, 0.09, 0.1, 0.1, 0.3, 0.35, 0.4});
    auto out = est_trim_fill(ds, spec("trim_fill"));
    REQUIRE(out.converged());
    CHECK(out.est->aux.at("n_imputed") >= 1.0);
    CHECK(out.est->estimate < est_re_kh(ds, spec("re_kh")).est->estimate);
  }
}

TEST_CASE("three parameter selection model") {
  SECTION("fixed omega reduces to normal-normal maximum likelihood") {
    Rng rng(derive_seed({29, "t", "sm-nn", 1}));
    for (int i = 0; i < 10; ++i) {
      std::vector<double> y, se;
      int k = 12;
      for (int j = 0; j < k; ++j) {
        se.push_back(0.08 + 0.3 * rng.uniform01());
        y.push_back(rng.normal(0.25, 0.2) + rng.normal(0.0, se.back()));
      }
      Dataset ds = mk_ds(y, se);
      auto sp = spec("sm_3p");
      sp.options["fix_omega"] = 1.0;
      auto out = est_sm_3p(ds, sp);
      REQUIRE(out.converged());
      CHECK(out.est->aux.at("omega_hat") == 1.0);

      auto oracle = pbtest::nn_ml_oracle(y, se);
      CHECK_THAT(out.est->estimate, WithinAbs(oracle.mu, 2e-3));
      double fitted_nll =
          pbtest::nn_nll_oracle(y, se, out.est->estimate, out.est->aux.at("tau2_hat"));
      CHECK(fitted_nll <= oracle.nll + 1e-5);
      CHECK_THAT(-out.est->aux.at("log_lik"), WithinAbs(fitted_nll, 1e-8));
    }
  }

  SECTION("one-sided significance mix required") {
    auto all_sig = est_sm_3p(mk_ds({1.0, 1.1, 1.2, 1.3}, {0.1, 0.1, 0.1, 0.1}), spec("sm_3p"));
    CHECK_FALSE(all_sig.converged());
    CHECK(all_sig.note == "weights unidentified");

    auto none_sig = est_sm_3p(mk_ds({0.1, 0.0, -0.1, 0.05}, {1.0, 1.0, 1.0, 1.0}), spec("sm_3p"));
    CHECK_FALSE(none_sig.converged());
    CHECK(none_sig.note == "weights unidentified");
  }

  SECTION("reported optimum is a local minimum of the likelihood") {
    // A selected dataset with a clear mix of significant and filtered studies.
    Condition c;
    c.condition_id = "c";
    c.k = 40;
    c.mu = 0.2;
    c.tau = 0.15;
    c.selection_prob = 0.3;
    c.one_sided = true;
    c.n_profile = {15, 25, 50, 100, 250};
    auto sim = simulate_condition(c, 7, 77, "t");
    Dataset ds;
    ds.studies = sim.studies;

    auto out = est_sm_3p(ds, spec("sm_3p"));
    REQUIRE(out.converged());
    double mu = out.est->estimate;
    double tau2 = out.est->aux.at("tau2_hat");
    double omega = out.est->aux.at("omega_hat");
    REQUIRE(omega > 1e-6);
    REQUIRE(omega < 1e3);
    REQUIRE(tau2 > 1e-10);

    std::vector<double> y, se;
    for (const auto& s : ds.studies) {
      y.push_back(s.yi);
      se.push_back(s.sei);
    }
    double f0 = pbtest::sm3p_nll_oracle(y, se, mu, tau2, omega);
    CHECK_THAT(-out.est->aux.at("log_lik"), WithinAbs(f0, 1e-8));

    // Nudging any coordinate must not improve the fit.
    const double h = 1e-4;
    double lt = std::log(tau2), lo = std::log(omega);
    auto f = [&](double m, double t, double o) {
      return pbtest::sm3p_nll_oracle(y, se, m, std::exp(t), std::exp(o));
    };
    CHECK(f0 <= f(mu + h, lt, lo) + 1e-9);
    CHECK(f0 <= f(mu - h, lt, lo) + 1e-9);
    CHECK(f0 <= f(mu, lt + h, lo) + 1e-9);
    CHECK(f0 <= f(mu, lt - h, lo) + 1e-9);
    CHECK(f0 <= f(mu, lt, lo + h) + 1e-9);
    CHECK(f0 <= f(mu, lt, lo - h) + 1e-9);

    // And the finite-difference gradient is numerically flat.
    double g0 = (f(mu + h, lt, lo) - f(mu - h, lt, lo)) / (2 * h);
    double g1 = (f(mu, lt + h, lo) - f(mu, lt - h, lo)) / (2 * h);
    double g2 = (f(mu, lt, lo + h) - f(mu, lt, lo - h)) / (2 * h);
    CHECK(std::sqrt(g0 * g0 + g1 * g1 + g2 * g2) < 1e-4);
  }
}

TEST_CASE("waap wls") {
  SECTION("adequately powered subset is used alone") {
    // Precise studies pass sei <= |theta_w|/2.8, imprecise ones do not.
    auto ds = mk_ds({0.5, 0.52, 0.48, 0.7, 0.3, 0.6},
                    {0.1, 0.12, 0.11, 0.5, 0.55, 0.6});
    auto out = est_waap_wls(ds, spec("waap_wls"));
    REQUIRE(out.converged());
    CHECK(out.est->aux.at("n_adequate") == 3.0);
    CHECK(out.note.empty());

    auto subset = mk_ds({0.5, 0.52, 0.48}, {0.1, 0.12, 0.11});
    auto direct = est_wls(subset, spec("wls"));
    CHECK(out.est->estimate == direct.est->estimate);
    CHECK(out.est->se == direct.est->se);
  }

  SECTION("fewer than two adequate studies falls back to the full set") {
    auto ds = mk_ds({0.1, 0.12, 0.08}, {0.2, 0.25, 0.3});
    auto out = est_waap_wls(ds, spec("waap_wls"));
    REQUIRE(out.converged());
    CHECK(out.est->aux.at("n_adequate") == 0.0);
    CHECK(out.note == "fallback: <2 adequately powered");
    auto full = est_wls(ds, spec("wls"));
    CHECK(out.est->estimate == full.est->estimate);
    CHECK(out.est->se == full.est->se);
  }
}

TEST_CASE("scale equivariance") {
  Rng rng(derive_seed({30, "t", "scale", 1}));
  for (double c : {4.0, 3.7}) {
    for (const auto& info : method_registry()) {
      for (int rep = 0; rep < (info.id == "sm_3p" ? 3 : 20); ++rep) {
        auto ds = random_ds(rng, std::max(info.min_k, 6), 0.3 * rng.uniform01());
        Dataset scaled = ds;
        for (auto& s : scaled.studies) {
          s.yi *= c;
          s.sei *= c;
        }
        auto base = apply_method(ds, spec(info.id));
        auto big = apply_method(scaled, spec(info.id));
        REQUIRE(base.converged() == big.converged());
        if (!base.converged()) continue;
        double tol = (c == 4.0 ? 1e-12 : (info.id == "sm_3p" ? 1e-6 : 1e-9));
        CHECK_THAT(big.est->estimate, WithinAbs(c * base.est->estimate, tol * c));
        CHECK_THAT(big.est->se, WithinRel(c * base.est->se, tol));
        CHECK_THAT(big.est->ci_lower, WithinAbs(c * base.est->ci_lower, 10 * tol * c));
        CHECK_THAT(big.est->ci_upper, WithinAbs(c * base.est->ci_upper, 10 * tol * c));
        CHECK_THAT(big.est->p_value, WithinAbs(base.est->p_value, 100 * tol));
        if (base.est->aux.count("n_imputed"))
          CHECK(big.est->aux.at("n_imputed") == base.est->aux.at("n_imputed"));
        if (base.est->aux.count("branch_peese"))
          CHECK(big.est->aux.at("branch_peese") == base.est->aux.at("branch_peese"));
        if (base.est->aux.count("n_adequate"))
          CHECK(big.est->aux.at("n_adequate") == base.est->aux.at("n_adequate"));
        if (base.est->aux.count("tau2_hat"))
          CHECK_THAT(big.est->aux.at("tau2_hat"),
                     WithinAbs(c * c * base.est->aux.at("tau2_hat"), 100 * tol * c * c));
      }
    }
  }
}

TEST_CASE("ci and p agree on rejection") {
  Rng rng(derive_seed({31, "t", "ci-p", 1}));
  for (int i = 0; i < 100; ++i) {
    auto ds = random_ds(rng, 6 + (int)rng.pick_index(8), 0.4 * rng.uniform01());
    for (const auto& info : method_registry()) {
      auto out = apply_method(ds, spec(info.id));
      if (!out.converged()) continue;
      const auto& e = *out.est;
      if (std::abs(e.p_value - 0.05) < 1e-9) continue;
      bool reject_p = e.p_value < 0.05;
      bool reject_ci = e.ci_lower > 0 || e.ci_upper < 0;
      CHECK(reject_p == reject_ci);
    }
  }
}

TEST_CASE("study count guard") {
  Rng rng(derive_seed({32, "t", "mink", 1}));
  for (const auto& info : method_registry()) {
    auto small = random_ds(rng, info.min_k - 1);
    auto out = apply_method(small, spec(info.id));
    CHECK_FALSE(out.converged());
    CHECK(out.note == "InsufficientStudies");

    auto enough = random_ds(rng, info.min_k);
    auto ok = apply_method(enough, spec(info.id));
    CHECK(ok.note != "InsufficientStudies");
  }

  try {
    apply_method(random_ds(rng, 5), spec("nope"));
    FAIL("expected NotFound");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::not_found);
  }
}

TEST_CASE("result record conversion") {
  Rng rng(derive_seed({33, "t", "record", 1}));
  auto good = to_result_record(3, apply_method(random_ds(rng, 8), spec("fe")));
  CHECK(good.repetition == 3);
  CHECK(good.converged);
  CHECK(good.estimate);
  CHECK(good.p_value);

  auto bad = to_result_record(4, apply_method(random_ds(rng, 2), spec("peese")));
  CHECK(bad.repetition == 4);
  CHECK_FALSE(bad.converged);
  CHECK_FALSE(bad.estimate);
  CHECK(bad.note == "InsufficientStudies");
}

TEST_CASE("run_method over a store") {
  TempDir tmp;
  auto store = BenchStore::init(tmp / "b", "demo");
  Condition a, b;
  a.condition_id = "c-a";
  a.k = 6;
  a.mu = 0.2;
  a.tau = 0.1;
  a.selection_prob = 1.0;
  a.n_profile = {25, 50};
  b = a;
  b.condition_id = "c-b";
  b.mu = 0.0;
  generate_dgm(store, "g", "1.0.0", {a, b}, 30, 42, 2);

  CHECK(run_method(store, "g", spec("fe"), 2) == 2);
  auto path_a = store.results_path("g", "fe", "c-a");
  auto rows = read_results_csv(path_a);
  CHECK(rows.size() == 30);
  auto bytes = pbtest::slurp(path_a);

  SECTION("existing results are kept") {
    CHECK(run_method(store, "g", spec("fe"), 2) == 0);
    CHECK(pbtest::slurp(path_a) == bytes);
  }

  SECTION("force and thread count reproduce bytes") {
    CHECK(run_method(store, "g", spec("fe"), 1, true) == 2);
    CHECK(pbtest::slurp(path_a) == bytes);
    CHECK(run_method(store, "g", spec("fe"), 8, true) == 2);
    CHECK(pbtest::slurp(path_a) == bytes);
  }

  SECTION("every repetition appears exactly once") {
    std::set<int> reps;
    for (const auto& r : rows) reps.insert(r.repetition);
    CHECK(reps.size() == 30);
    CHECK(*reps.begin() == 1);
    CHECK(*reps.rbegin() == 30);
  }

  SECTION("unknown method refused") {
    try {
      run_method(store, "g", spec("nope"));
      FAIL("expected NotFound");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::not_found);
    }
  }

  SECTION("missing data file refused") {
    fs::remove(store.data_path("g", "c-b"));
    try {
      run_method(store, "g", spec("wls"));
      FAIL("expected NotFound");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::not_found);
      CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("c-b"));
    }
  }
}
