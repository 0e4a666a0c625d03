#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <random>
#include <set>

#include "pbbench/csv.hpp"
#include "pbbench/error.hpp"
#include "pbbench/parallel.hpp"
#include "pbbench/rng.hpp"
#include "pbbench/semver.hpp"
#include "pbbench/sha256.hpp"
#include "pbbench/stats.hpp"

using namespace pbbench;

TEST_CASE("sha256 FIPS vectors") {
  CHECK(Sha256::hex(Sha256::hash("")) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(Sha256::hex(Sha256::hash("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(Sha256::hex(Sha256::hash("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq")) ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
  CHECK(Sha256::hex(Sha256::hash(std::string(1000000, 'a'))) ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("sha256 incremental updates match one-shot") {
  Sha256 h;
  h.update("abcdbcdecdefdefgefgh");
  h.update("fghighijhijkijkljklm");
  h.update("klmnlmnomnopnopq");
  CHECK(Sha256::hex(h.finish()) ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("normal quantile matches boost across the unit interval") {
  boost::math::normal_distribution<double> n01;
  for (double p :
       {1e-300, 1e-16, 1e-10, 1e-6, 0.001, 0.025, 0.2, 0.5, 0.7, 0.975, 0.999, 1 - 1e-10}) {
    double ours = stats::norm_quantile(p);
    double ref = boost::math::quantile(n01, p);
    CHECK(ours == Catch::Approx(ref).epsilon(1e-12).margin(1e-13));
  }
  CHECK(stats::norm_quantile(0.5) == 0.0);
}

TEST_CASE("normal cdf and quantile round-trip") {
  for (double z : {-8.0, -3.2, -1.0, -0.1, 0.0, 0.3, 1.959963984540054, 5.5}) {
    CHECK(stats::norm_quantile(stats::norm_cdf(z)) == Catch::Approx(z).epsilon(1e-9));
    CHECK(stats::norm_cdf(z) + stats::norm_sf(z) == Catch::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("t distribution wraps a real implementation") {
  CHECK(stats::t_quantile(0.975, 1) == Catch::Approx(12.706204736).epsilon(1e-9));
  CHECK(stats::t_quantile(0.975, 2) == Catch::Approx(4.302652730).epsilon(1e-9));
  CHECK(stats::t_sf(0.0, 5) == Catch::Approx(0.5));
  CHECK(stats::t_sf(2.0, 10) == Catch::Approx(0.03669401).epsilon(1e-5));
}

TEST_CASE("semver parsing and ordering") {
  auto v = parse_semver("1.2.3");
  REQUIRE(v);
  CHECK(v->major == 1);
  CHECK(v->minor == 2);
  CHECK(v->patch == 3);
  CHECK_FALSE(parse_semver("1.2"));
  CHECK_FALSE(parse_semver("v1.2.3"));
  CHECK_FALSE(parse_semver("1.2.3-rc1"));
  CHECK_FALSE(parse_semver(""));
  CHECK(version_less("1.0.0", "1.0.1"));
  CHECK(version_less("1.9.0", "1.10.0"));
  CHECK(version_less("0.9.9", "1.0.0"));
  CHECK_FALSE(version_less("1.0.0", "1.0.0"));
  CHECK_FALSE(version_less("junk", "1.0.0"));
}

TEST_CASE("doubles round-trip through csv formatting") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 20000; ++i) {
    double x = i % 3 == 0 ? u(gen) : u(gen) * std::pow(10.0, int(gen() % 40) - 20);
    double back;
    REQUIRE(csv::parse_double(csv::format_double(x), back));
    CHECK(back == x);
  }
  double inf;
  CHECK(csv::format_double(std::numeric_limits<double>::infinity()) == "inf");
  REQUIRE(csv::parse_double("inf", inf));
  CHECK(std::isinf(inf));
}

TEST_CASE("csv parsing is strict") {
  double d;
  long long n;
  CHECK_FALSE(csv::parse_double("1.2x", d));
  CHECK_FALSE(csv::parse_double("", d));
  CHECK_FALSE(csv::parse_int("3.5", n));
  CHECK(csv::parse_int("-12", n));
  CHECK(n == -12);
  bool b;
  CHECK(csv::parse_bool("true", b));
  CHECK(b);
  CHECK(csv::parse_bool("false", b));
  CHECK_FALSE(b);
  CHECK_FALSE(csv::parse_bool("TRUE", b));

  std::vector<std::string_view> f;
  csv::split("a,,c", f);
  REQUIRE(f.size() == 3);
  CHECK(f[0] == "a");
  CHECK(f[1].empty());
  CHECK(f[2] == "c");
}

TEST_CASE("read_lines rejects carriage returns") {
  auto dir = std::filesystem::temp_directory_path() / "pbbench-util";
  std::filesystem::create_directories(dir);
  csv::atomic_write_file(dir / "crlf.csv", "a,b\r\n1,2\r\n");
  CHECK_THROWS_AS(csv::read_lines(dir / "crlf.csv"), Error);
  csv::atomic_write_file(dir / "ok.csv", "a,b\n1,2\n");
  auto lines = csv::read_lines(dir / "ok.csv");
  REQUIRE(lines.size() == 2);
  CHECK(lines[1] == "1,2");
}

TEST_CASE("seed derivation is pure and collision-free at scale") {
  SeedSpec a{42, "smd", "k10-mu000-tau000-sel100", 1};
  CHECK(derive_seed(a) == derive_seed(a));
  SeedSpec b = a;
  b.repetition = 2;
  CHECK(derive_seed(a) != derive_seed(b));

  std::set<std::array<std::uint8_t, 32>> keys;
  for (int cond = 0; cond < 100; ++cond)
    for (int rep = 1; rep <= 10000; ++rep)
      keys.insert(derive_seed({42, "smd", "c" + std::to_string(cond), rep}));
  CHECK(keys.size() == 1000000);
}

TEST_CASE("rng streams are deterministic and well-behaved") {
  Rng r1(derive_seed({1, "d", "c", 1}));
  Rng r2(derive_seed({1, "d", "c", 1}));
  for (int i = 0; i < 1000; ++i) CHECK(r1.next_u64() == r2.next_u64());

  Rng r(derive_seed({1, "d", "c", 2}));
  double mn = 1, mx = 0, sum = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    mn = std::min(mn, u);
    mx = std::max(mx, u);
    sum += u;
  }
  CHECK(sum / n == Catch::Approx(0.5).margin(5.0 / std::sqrt(12.0 * n)));
  CHECK(mn < 0.001);
  CHECK(mx > 0.999);
}

TEST_CASE("pick_index stays in range and covers uniformly") {
  Rng r(derive_seed({9, "d", "c", 1}));
  std::vector<long> counts(5, 0);
  for (int i = 0; i < 100000; ++i) {
    auto idx = r.pick_index(5);
    REQUIRE(idx < 5);
    ++counts[idx];
  }
  for (long c : counts) CHECK(c == Catch::Approx(20000).margin(600));
}

TEST_CASE("normal draws have the requested moments") {
  Rng r(derive_seed({3, "d", "c", 1}));
  const int n = 200000;
  std::vector<double> z(n);
  for (auto& v : z) v = r.normal(1.5, 2.0);
  CHECK(stats::mean(z) == Catch::Approx(1.5).margin(5 * 2.0 / std::sqrt(n)));
  CHECK(stats::sample_sd(z) == Catch::Approx(2.0).margin(0.02));
  Rng r0(derive_seed({3, "d", "c", 2}));
  CHECK(r0.normal(0.7, 0.0) == 0.7);
}

TEST_CASE("parallel_for_index covers every index exactly once") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for_index(hits.size(), 8, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);

  CHECK_THROWS_AS(parallel_for_index(16, 4,
                                     [&](std::size_t i) {
                                       if (i == 7) raise(Errc::invalid_argument, "boom");
                                     }),
                  Error);
}

TEST_CASE("error codes carry stable names") {
  CHECK(std::string(errc_name(Errc::already_initialized)) == "AlreadyInitialized");
  CHECK(std::string(errc_name(Errc::rejection_overflow)) == "RejectionOverflow");
  try {
    raise(Errc::not_found, "x");
    FAIL("unreachable");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::not_found);
  }
}
