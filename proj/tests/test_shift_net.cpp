#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "arcnet/grad_check.hpp"
#include "arcnet/labels.hpp"
#include "arcnet/pretrain.hpp"
#include "arcnet/shift_net.hpp"

using namespace arcnet;

namespace {

constexpr Polarity P = Polarity::Positive;
constexpr Polarity N = Polarity::Negative;
constexpr Polarity U = Polarity::Neutral;

ShiftNetConfig small_config(std::size_t d, std::size_t h) {
  ShiftNetConfig c;
  c.feature_dim = d;
  c.hidden_dim = h;
  c.input = ShiftInput::Text;
  return c;
}

}  // namespace

TEST_CASE("zero shift net is undecided") {
  auto p = ShiftNetParams<double>::zeros(small_config(3, 5));
  std::vector<double> a{1, 2, 3}, b{-4, 0, 9};
  CHECK(shift_probability<double, double>(p, a, b) == 0.5);
}

TEST_CASE("identical utterances give a zero difference segment") {
  auto p = ShiftNetParams<double>::random(small_config(2, 3), 3);
  auto q = p;
  // Weights reading the |difference| segment cannot matter when it is zero.
  for (std::size_t h = 0; h < 3; ++h) {
    for (std::size_t c = 4; c < 6; ++c) q.W1.data[h * 6 + c] += 10.0;
  }
  std::vector<double> a{0.3, -0.7}, b{0.4, -0.7};
  CHECK(shift_probability<double, double>(p, a, a) == shift_probability<double, double>(q, a, a));
  CHECK(shift_probability<double, double>(p, a, b) != shift_probability<double, double>(q, a, b));
}

TEST_CASE("shift net worked example") {
  auto p = ShiftNetParams<double>::zeros(small_config(2, 1));
  p.W1.data = {1, 1, 1, 1, 1, 1};
  p.w2.data = {1};
  std::vector<double> prev{0, 0}, cur{1, 0};
  const double hidden = std::tanh(2.0);
  const double inertia = 1.0 / (1.0 + std::exp(-hidden));
  CHECK(hidden == doctest::Approx(0.964028).epsilon(1e-6));
  CHECK(inertia == doctest::Approx(0.723927).epsilon(1e-6));
  const double ps = shift_probability<double, double>(p, prev, cur);
  CHECK(ps == doctest::Approx(1.0 - inertia).epsilon(1e-14));
  CHECK(ps == doctest::Approx(0.276073).epsilon(1e-6));
}

TEST_CASE("linear hidden layer drops the tanh") {
  auto cfg = small_config(2, 1);
  cfg.linear = true;
  auto p = ShiftNetParams<double>::zeros(cfg);
  p.W1.data = {1, 1, 1, 1, 1, 1};
  p.w2.data = {1};
  std::vector<double> prev{0, 0}, cur{1, 0};
  CHECK(shift_probability<double, double>(p, prev, cur) == doctest::Approx(1.0 - oracle::sigmoid(2.0)));
}

TEST_CASE("shift net matches the scalar oracle") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = ShiftNetParams<double>::random(small_config(4, 6), trial);
    std::vector<double> a(4), b(4);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng);
    const double got = shift_probability<double, double>(p, a, b);
    CHECK(got == doctest::Approx(oracle::shift_prob(p, a, b)).epsilon(1e-12));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("shift net rejects wrong feature length") {
  auto p = ShiftNetParams<double>::zeros(small_config(3, 2));
  std::vector<double> a{1, 2}, b{1, 2};
  CHECK_THROWS_AS((shift_probability<double, double>(p, a, b)), ShapeError);
}

TEST_CASE("gradient check of the shift BCE loss") {
  auto p = ShiftNetParams<double>::random(small_config(3, 4), 9);
  ParamSet<double> set;
  p.collect(set);
  std::vector<double> a{0.5, -1.0, 0.2}, b{-0.3, 0.8, 0.1};
  auto loss = [&](Graph<double>& g) {
    Var l1 = g.bce(shift_probability(g, p, g.constant(a), g.constant(b)).shift, 1);
    Var l2 = g.bce(shift_probability(g, p, g.constant(b), g.constant(b)).shift, 0);
    std::vector<Var> terms{l1, l2};
    return g.sum(terms);
  };
  auto r = grad_check<double>(loss, set);
  CHECK(r.entries_checked == 36 + 4 + 4 + 1);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("derive shift labels examples") {
  CHECK(derive_shift_labels(std::vector<Polarity>{P, N, N, P}) == std::vector<int>{1, 0, 1});
  CHECK(derive_shift_labels(std::vector<Polarity>{P, U, N}) == std::vector<int>{0, 0});
  CHECK(derive_shift_labels(std::vector<Polarity>{N}).empty());
  CHECK_THROWS_AS(derive_shift_labels(std::vector<Polarity>{}), ValidationError);
}

TEST_CASE("derive shift labels over all length-4 sequences") {
  const Polarity all[3] = {P, N, U};
  int count = 0;
  for (int code = 0; code < 81; ++code) {
    std::vector<Polarity> seq;
    for (int k = 0, c = code; k < 4; ++k, c /= 3) seq.push_back(all[c % 3]);
    CHECK(derive_shift_labels(seq) == oracle::shift_flags(seq));
    ++count;
  }
  CHECK(count == 81);
}

TEST_CASE("derive shift labels on random sequences") {
  std::mt19937_64 rng(17);
  const Polarity all[3] = {P, N, U};
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t len = 1 + rng() % 20;
    std::vector<Polarity> seq;
    for (std::size_t i = 0; i < len; ++i) seq.push_back(all[rng() % 3]);
    const auto flags = derive_shift_labels(seq);
    CHECK(flags.size() == len - 1);
    CHECK(flags == oracle::shift_flags(seq));
  }
}

TEST_CASE("derive shift labels through a polarity map") {
  PolarityMap map{{"happy", P}, {"sad", N}, {"neutral", U}};
  std::vector<std::string> seq{"happy", "sad", "neutral", "sad", "happy"};
  CHECK(derive_shift_labels(seq, map) == std::vector<int>{1, 0, 0, 1});
  std::vector<std::string> bad{"happy", "bored"};
  CHECK_THROWS_AS(derive_shift_labels(bad, map), ValidationError);
}

TEST_CASE("sentiment polarity boundary") {
  CHECK(sentiment_polarity(0.0) == P);
  CHECK(sentiment_polarity(-3.0) == N);
  CHECK(sentiment_polarity(2.5) == P);
  CHECK(sentiment_polarity(-1e-12) == N);
}

TEST_CASE("pretraining separates synthetic shifts") {
  SyntheticConfig sc;
  sc.n_conversations = 300;
  sc.utterances_per_conversation = 8;
  sc.separation = 2.0;
  sc.noise = 0.5;
  sc.inertia = 0.66;
  sc.dims = {8, 4, 4};
  Corpus c = synth_generate(sc);
  auto view = LabelView::for_corpus(c);
  ShiftNetConfig cfg = small_config(8, 32);
  PretrainConfig pc;
  auto res = pretrain(ShiftNetParams<double>::random(cfg, 42), c, view, pc);
  CHECK(res.report.f1 >= 0.9);
  CHECK(res.report.best_epoch >= 1);
  CHECK(res.report.history.size() == 5);
  for (const auto& e : res.report.history) CHECK(res.report.f1 >= e.val_f1);
}

TEST_CASE("pretraining is deterministic") {
  SyntheticConfig sc;
  sc.n_conversations = 20;
  sc.dims = {4, 2, 2};
  Corpus c = synth_generate(sc);
  auto view = LabelView::for_corpus(c);
  PretrainConfig pc;
  pc.epochs = 2;
  auto a = pretrain(ShiftNetParams<double>::random(small_config(4, 8), 1), c, view, pc);
  auto b = pretrain(ShiftNetParams<double>::random(small_config(4, 8), 1), c, view, pc);
  CHECK(a.params.W1.data == b.params.W1.data);
  CHECK(a.params.b2.data == b.params.b2.data);
}

TEST_CASE("pretraining needs pairs and polarities") {
  Corpus c;
  c.name = "one";
  c.dims = {2, 1, 1};
  c.label_set = {"pos", "neg"};
  c.polarity_map = {{"pos", P}, {"neg", N}};
  Utterance u;
  u.utterance_id = "u0";
  u.speaker = "A";
  u.features = {std::vector<double>{1, 2}, std::vector<double>{0}, std::vector<double>{0}};
  u.emotion_labels = {0};
  c.conversations.push_back({"c0", {u}});
  auto view = LabelView::for_corpus(c);
  auto p = ShiftNetParams<double>::zeros(small_config(2, 2));
  CHECK_THROWS_AS(pretrain(p, c, view, PretrainConfig{}), ValidationError);

  Utterance v = u;
  v.utterance_id = "u1";
  c.conversations[0].utterances.push_back(v);
  c.polarity_map.clear();
  CHECK_THROWS_AS(pretrain(p, c, view, PretrainConfig{}), ValidationError);
}
