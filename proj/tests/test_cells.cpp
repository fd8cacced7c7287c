#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "arcnet/cells.hpp"
#include "arcnet/grad_check.hpp"

using namespace arcnet;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("gru with zero params keeps a zero state at zero") {
  auto p = GruParams<double>::zeros(4, 3);
  std::vector<double> h(3, 0.0), x{1.0, -2.0, 3.0, 0.5};
  CHECK(gru_step<double>(p, h, x) == std::vector<double>(3, 0.0));
}

TEST_CASE("gru update gate at zero returns the previous state") {
  auto p = GruParams<double>::random(3, 3, 1, "g");
  for (auto& v : p.b_z.data) v = -1e4;
  std::vector<double> h{0.3, -0.2, 0.9}, x{1.0, 2.0, -1.0};
  auto out = gru_step<double>(p, h, x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(h[i]).epsilon(1e-14));
}

TEST_CASE("gru matches the scalar oracle on random instances") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d_in = 1 + trial % 5, d_h = 1 + (trial / 5) % 4;
    auto p = GruParams<double>::random(d_in, d_h, 100 + trial, "g");
    auto h = random_vec(rng, d_h);
    auto x = random_vec(rng, d_in);
    auto got = gru_step<double>(p, h, x);
    auto want = oracle::gru(p, h, x);
    for (std::size_t i = 0; i < d_h; ++i) CHECK(std::fabs(got[i] - want[i]) <= 1e-12);
  }
}

TEST_CASE("gru rejects mismatched inputs") {
  auto p = GruParams<double>::zeros(4, 3);
  std::vector<double> h(3), x(5);
  CHECK_THROWS_AS(gru_step<double>(p, h, x), ShapeError);
}

TEST_CASE("arc cell with p_shift 0 keeps the previous state exactly") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = ArcParams<double>::random(5, 4, trial % 2 == 1, trial, "arc");
    auto e = random_vec(rng, 4);
    auto s = random_vec(rng, 5);
    CHECK(arc_step<double>(p, e, s, 0.0) == e);
  }
}

TEST_CASE("arc cell with p_shift 1 ignores the previous state") {
  std::mt19937_64 rng(10);
  auto p = ArcParams<double>::random(5, 4, false, 3, "arc");
  auto s = random_vec(rng, 5);
  auto e1 = random_vec(rng, 4);
  auto e2 = random_vec(rng, 4);
  auto a = arc_step<double>(p, e1, s, 1.0);
  auto b = arc_step<double>(p, e2, s, 1.0);
  CHECK(a == b);
  auto ws = oracle::matvec(p.W, s);
  for (std::size_t i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(std::tanh(ws[i])).epsilon(1e-15));
}

TEST_CASE("arc cell one-dimensional worked example") {
  auto p = ArcParams<double>::zeros(1, 1);
  p.W.data = {1.0};
  p.U.data = {1.0};
  std::vector<double> e{0.5}, s{0.0};
  auto out = arc_step<double>(p, e, s, 0.5);
  const double cand = std::tanh(0.5 * 0.5);
  CHECK(cand == doctest::Approx(0.244919).epsilon(1e-6));
  CHECK(out[0] == doctest::Approx(0.5 * 0.5 + 0.5 * cand).epsilon(1e-15));
  CHECK(out[0] == doctest::Approx(0.372459).epsilon(1e-6));
}

TEST_CASE("arc cell matches the scalar oracle") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = ArcParams<double>::random(3, 4, trial % 3 == 0, trial, "arc");
    auto e = random_vec(rng, 4);
    auto s = random_vec(rng, 3);
    const double ps = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    auto got = arc_step<double>(p, e, s, ps);
    auto want = oracle::arc(p, e, s, ps);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(got[i] - want[i]) <= 1e-12);
  }
}

TEST_CASE("arc cell keeps the state inside [-1, 1]") {
  std::mt19937_64 rng(13);
  auto p = ArcParams<double>::random(3, 3, false, 1, "arc");
  std::vector<double> e(3, 0.0);
  for (int t = 0; t < 200; ++t) {
    auto s = random_vec(rng, 3);
    for (auto& v : s) v *= 50.0;
    e = arc_step<double>(p, e, s, std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    for (double v : e) CHECK(std::fabs(v) <= 1.0);
  }
}

TEST_CASE("arc cell rejects p_shift outside [0, 1]") {
  auto p = ArcParams<double>::zeros(1, 1);
  std::vector<double> e{0.0}, s{0.0};
  CHECK_THROWS_AS(arc_step<double>(p, e, s, 1.5), ValidationError);
  CHECK_THROWS_AS(arc_step<double>(p, e, s, -0.1), ValidationError);
  CHECK_THROWS_AS(arc_step<double>(p, e, s, std::nan("")), ValidationError);
}

TEST_CASE("gradient check of the gru cell") {
  std::mt19937_64 rng(21);
  auto p = GruParams<double>::random(3, 4, 8, "g");
  auto h = random_vec(rng, 4);
  auto x = random_vec(rng, 3);
  ParamSet<double> set;
  p.collect(set, "g");
  auto loss = [&](Graph<double>& g) {
    Var out = gru_step(g, p, g.constant(h), g.constant(x)).h;
    return g.dot(out, g.constant(std::vector<double>{1.0, -2.0, 0.5, 3.0}));
  };
  CHECK(grad_check<double>(loss, set).max_rel_error <= 1e-4);
}

TEST_CASE("gradient check of the arc cell including p_shift") {
  std::mt19937_64 rng(22);
  auto p = ArcParams<double>::random(3, 4, true, 8, "arc");
  Tensor<double> ps({1}, 0.37);
  auto e = random_vec(rng, 4);
  auto s = random_vec(rng, 3);
  ParamSet<double> set;
  p.collect(set, "arc");
  set.add("p_shift", ps);
  auto loss = [&](Graph<double>& g) {
    Var out = arc_step(g, p, g.constant(e), g.constant(s), g.param(ps)).e;
    return g.dot(out, out);
  };
  auto r = grad_check<double>(loss, set);
  CHECK(r.entries_checked == 12 + 16 + 4 + 1);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("float and double cells agree closely") {
  auto pd = GruParams<double>::random(3, 3, 4, "g");
  GruParams<float> pf = GruParams<float>::zeros(3, 3);
  pd.for_each("g", [&](const std::string& name, Tensor<double>& t) {
    pf.for_each("g", [&](const std::string& n2, Tensor<float>& u) {
      if (n2 == name) u = tensor_cast<float>(t);
    });
  });
  std::vector<double> h{0.1, 0.2, 0.3}, x{1, -1, 0.5};
  std::vector<float> hf{0.1f, 0.2f, 0.3f}, xf{1, -1, 0.5f};
  auto a = gru_step<double>(pd, h, x);
  auto b = gru_step<float>(pf, hf, xf);
  for (std::size_t i = 0; i < 3; ++i) CHECK(static_cast<double>(b[i]) == doctest::Approx(a[i]).epsilon(1e-5));
}
