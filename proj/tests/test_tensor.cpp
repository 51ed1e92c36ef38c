#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "ee/tensor.hpp"

using namespace ee;

namespace {

Mat random_mat(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

ParamStore make_store(const std::vector<std::pair<std::string, std::pair<int, int>>>& specs,
                      uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore store;
  for (const auto& [name, shape] : specs)
    store.add(name, shape.first, shape.second, Init::xavier_uniform, rng);
  return store;
}

}  // namespace

TEST_CASE("softmax rows sum to 1 and are shift-invariant") {
  std::mt19937_64 rng(1);
  Tape tape;
  Mat x = random_mat(4, 7, rng);
  auto* p = tape.softmax_rows(tape.constant(x));
  for (int r = 0; r < 4; ++r)
    CHECK(p->val.row(r).sum() == doctest::Approx(1.0).epsilon(1e-6));
  Mat shifted = x;
  shifted.array() += 500.0;  // also exercises overflow protection
  Tape tape2;
  auto* p2 = tape2.softmax_rows(tape2.constant(shifted));
  CHECK((p->val - p2->val).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("max-pool over a single row is that row") {
  Tape tape;
  Mat x = random_mat(1, 5, *(new std::mt19937_64(2)));
  auto* out = tape.maxpool_rows(tape.constant(x));
  CHECK(out->val == x);
}

TEST_CASE("dropout with rate 0 or eval mode is the identity") {
  std::mt19937_64 rng(3);
  Tape tape;
  auto* x = tape.constant(random_mat(3, 4, rng));
  CHECK(tape.dropout(x, 0.0, true, rng) == x);
  CHECK(tape.dropout(x, 0.5, false, rng) == x);
  CHECK_THROWS_AS(tape.dropout(x, 1.0, true, rng), DimensionError);
}

TEST_CASE("dropout uses inverted scaling: kept entries are x / keep") {
  std::mt19937_64 rng(4);
  Tape tape;
  Mat x = Mat::Ones(20, 20);
  auto* out = tape.dropout(tape.constant(x), 0.46, true, rng);
  int kept = 0;
  for (Eigen::Index i = 0; i < out->val.size(); ++i) {
    double v = out->val.data()[i];
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.54)));
    if (v != 0.0) ++kept;
  }
  CHECK(kept > 120);  // ~216 expected of 400
  CHECK(kept < 320);
}

TEST_CASE("shape mismatches raise dimension errors naming the primitive") {
  Tape tape;
  auto* a = tape.constant(Mat::Zero(2, 3));
  auto* b = tape.constant(Mat::Zero(2, 3));
  CHECK_THROWS_WITH_AS(tape.matmul(a, b),
                       doctest::Contains("matmul"), DimensionError);
  CHECK_THROWS_WITH_AS(tape.add(a, tape.constant(Mat::Zero(3, 2))),
                       doctest::Contains("add"), DimensionError);
  CHECK_THROWS_WITH_AS(tape.nll_loss(a, {0, 1, 2}),
                       doctest::Contains("nll_loss"), DimensionError);
}

TEST_CASE("quadratic gradient matches the analytic 2*theta") {
  ParamStore store = make_store({{"theta", {3, 4}}}, 11);
  auto loss = [](ParamStore& s) {
    Tape tape;
    auto* th = tape.param(s, "theta");
    auto* out = tape.sum_all(tape.mul(th, th));
    tape.backward(out);
    return out->val(0, 0);
  };
  CHECK(grad_check(loss, store, 1e-6, 12, 0) < 1e-6);
  store.zero_grads();
  loss(store);
  Mat expect = 2.0 * store.value("theta");
  CHECK((store.grad("theta") - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("constant objective has zero gradient") {
  ParamStore store = make_store({{"theta", {2, 2}}}, 12);
  auto loss = [](ParamStore& s) {
    Tape tape;
    tape.param(s, "theta");
    auto* out = tape.constant(Mat::Constant(1, 1, 3.5));
    tape.backward(out);
    return out->val(0, 0);
  };
  CHECK(grad_check(loss, store, 1e-6, 4, 0) == 0.0);
}

TEST_CASE("every primitive passes a finite-difference check") {
  // one composite touching matmul, affine, relu, concat, rows, maxpool,
  // bilinear, mul, scale, add, softmax and nll
  for (uint64_t seed : {21ull, 22ull, 23ull}) {
    ParamStore store = make_store({{"emb", {6, 3}},
                                   {"w1", {5, 4}},
                                   {"b1", {1, 4}},
                                   {"wb", {4, 16}},
                                   {"w2", {4, 3}},
                                   {"b2", {1, 3}}},
                                  seed);
    auto loss = [](ParamStore& s) {
      Tape tape;
      auto* emb = tape.param(s, "emb");
      auto* toks = tape.rows(emb, {0, 2, 5, 2});
      auto* pooled = tape.maxpool_rows(toks);           // 1 x 3
      auto* more = tape.rows(emb, {1, 3});
      auto* pooled2 = tape.maxpool_rows(more);          // 1 x 3
      auto* mixed = tape.scale(tape.mul(pooled, pooled2), 0.5);  // 1 x 3
      auto* x = tape.concat_cols({pooled, mixed});               // 1 x 6
      auto* h = tape.relu(tape.matmul(x, tape.constant(Mat::Ones(6, 5))));
      auto* h2 = tape.relu(tape.affine(h, tape.param(s, "w1"),
                                       tape.param(s, "b1")));  // 1 x 4
      auto* bl = tape.bilinear(h2, tape.param(s, "wb"), h2);   // 1 x 4
      auto* mix = tape.add(h2, tape.scale(bl, 0.1));
      auto* logits = tape.affine(mix, tape.param(s, "w2"),
                                 tape.param(s, "b2"));         // 1 x 3
      auto* probs = tape.softmax_rows(logits);
      auto* out = tape.nll_loss(probs, {1});
      tape.backward(out);
      return out->val(0, 0);
    };
    CHECK(grad_check(loss, store, 1e-5, 120, seed) < 1e-6);
  }
}

TEST_CASE("row stacking and outer products pass finite differences") {
  ParamStore store = make_store({{"a", {3, 2}}, {"b", {3, 4}}, {"w", {8, 2}}},
                                91);
  auto loss = [](ParamStore& s) {
    Tape tape;
    auto* a = tape.param(s, "a");
    auto* b = tape.param(s, "b");
    auto* stacked = tape.concat_rows({a, tape.scale(a, -1.0), a});  // 9 x 2
    auto* outer = tape.outer_rows(tape.param(s, "b"), b);           // 3 x 16
    (void)stacked;
    auto* mix = tape.matmul(outer, tape.constant(Mat::Ones(16, 2)));
    auto* out =
        tape.sum_all(tape.mul(tape.concat_rows({mix, mix, mix}), stacked));
    tape.backward(out);
    return out->val(0, 0);
  };
  CHECK(grad_check(loss, store, 1e-5, 60, 1) < 1e-6);
}

TEST_CASE("outer product plus matmul equals the bilinear primitive") {
  std::mt19937_64 rng(92);
  Mat a = random_mat(1, 3, rng), b = random_mat(1, 4, rng);
  Mat w = random_mat(5, 12, rng);  // 5 forms of 3 x 4, row-major rows
  Tape tape;
  auto* direct = tape.bilinear(tape.constant(a), tape.constant(w),
                               tape.constant(b));
  // w transposed to 12 x 5 so the reshaped route is a plain matmul
  auto* via_outer = tape.matmul(
      tape.outer_rows(tape.constant(a), tape.constant(b)),
      tape.constant(w.transpose()));
  CHECK((direct->val - via_outer->val).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("embedding rows with repeated indices accumulate gradients") {
  ParamStore store = make_store({{"emb", {4, 2}}}, 31);
  auto loss = [](ParamStore& s) {
    Tape tape;
    auto* picked = tape.rows(tape.param(s, "emb"), {2, 2, 2});
    auto* out = tape.sum_all(picked);
    tape.backward(out);
    return out->val(0, 0);
  };
  loss(store);
  CHECK(store.grad("emb")(2, 0) == doctest::Approx(3.0));
  CHECK(store.grad("emb")(0, 0) == 0.0);
  CHECK(grad_check(loss, store, 1e-6, 8, 0) < 1e-6);
}

TEST_CASE("forward passes do not mutate inputs") {
  std::mt19937_64 rng(41);
  Mat x = random_mat(3, 3, rng);
  Mat x_copy = x;
  Tape tape;
  auto* xin = tape.constant(x);
  auto* out = tape.sum_all(tape.relu(tape.matmul(xin, xin)));
  tape.backward(out);
  CHECK(xin->val == x_copy);
}

TEST_CASE("adam leaves parameters unchanged on zero gradients") {
  ParamStore store = make_store({{"w", {2, 2}}}, 51);
  Mat before = store.value("w");
  store.grad("w").setZero();
  store.adam_step(0.001);
  CHECK(store.value("w") == before);
  CHECK_THROWS(ParamStore{}.adam_step(0.001));
}

TEST_CASE("adam minimizes a 1-D quadratic") {
  std::mt19937_64 rng(61);
  ParamStore store;
  store.add("theta", 1, 1, Init::zeros, rng);
  store.value("theta")(0, 0) = 5.0;
  for (int step = 0; step < 2000; ++step) {
    store.grad("theta") = 2.0 * store.value("theta");
    store.adam_step(0.01);
  }
  CHECK(std::abs(store.value("theta")(0, 0)) < 1e-3);
}

TEST_CASE("checkpoint JSON round-trips bit-exactly") {
  ParamStore store = make_store({{"w", {7, 5}}, {"emb", {11, 3}}}, 71);
  // dirty the Adam state so it is covered too
  store.grad("w").setConstant(0.25);
  store.grad("emb").setConstant(-1.5);
  store.adam_step(0.001);
  std::string path = "/tmp/ee_test_ckpt.json";
  store.save(path, "{\"hidden_dim\":85}");
  std::string config;
  ParamStore loaded = ParamStore::load(path, &config);
  CHECK(loaded == store);
  CHECK(config.find("85") != std::string::npos);
  // a second save of the loaded store is byte-identical
  CHECK(loaded.to_json("{\"hidden_dim\":85}") ==
        store.to_json("{\"hidden_dim\":85}"));
  std::remove(path.c_str());
}

TEST_CASE("initialization is seeded and per-kind") {
  std::mt19937_64 r1(81), r2(81), r3(82);
  ParamStore a, b, c;
  a.add("w", 10, 10, Init::xavier_uniform, r1);
  b.add("w", 10, 10, Init::xavier_uniform, r2);
  c.add("w", 10, 10, Init::xavier_uniform, r3);
  CHECK(a.value("w") == b.value("w"));
  CHECK(a.value("w") != c.value("w"));
  double bound = std::sqrt(6.0 / 20.0);
  CHECK(a.value("w").cwiseAbs().maxCoeff() <= bound);
  std::mt19937_64 r4(81);
  ParamStore d;
  d.add("e", 50, 50, Init::normal_002, r4);
  double sd = std::sqrt((d.value("e").array() - d.value("e").mean())
                            .square()
                            .mean());
  CHECK(sd == doctest::Approx(0.02).epsilon(0.15));
  CHECK(d.add("e", 50, 50, Init::zeros, r4) == d.value("e"));  // no re-init
}
