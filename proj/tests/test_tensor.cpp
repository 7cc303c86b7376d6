#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "clft/tensor.hpp"

using namespace clft;

TEST_CASE("tensor invariants: data length matches shape, grad matches data") {
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.data().size() == 24);
  CHECK_THROWS_AS(Tensor({2, 0, 4}), Error);
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), Error);
}

TEST_CASE("matmul: identity case") {
  Tensor eye = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Rng rng(3);
  Tensor a = Tensor::randn({3, 3}, rng, 1.0);
  Tensor out = matmul(eye, a);
  for (int64_t i = 0; i < 9; ++i) CHECK(out.data()[i] == doctest::Approx(a.data()[i]).epsilon(1e-15));
}

TEST_CASE("matmul: hand-multiplied 2x2 times 2x1") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_data({2, 1}, {0, 1});
  Tensor out = matmul(a, b);
  CHECK(out.data()[0] == 2.0);
  CHECK(out.data()[1] == 4.0);
}

TEST_CASE("matmul: gradient of sum(A.B) w.r.t. A is B^T broadcast, and FD agrees") {
  Rng rng(4);
  Tensor a = Tensor::randn({3, 4}, rng, 1.0, true);
  Tensor b = Tensor::randn({4, 2}, rng, 1.0, true);
  Tensor loss = sum_all(matmul(a, b));
  loss.backward();
  // d sum / dA[i][k] = sum_j B[k][j]
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t k = 0; k < 4; ++k) {
      double want = 0.0;
      for (int64_t j = 0; j < 2; ++j) want += b.data()[static_cast<size_t>(k * 2 + j)];
      CHECK(a.grad()[static_cast<size_t>(i * 4 + k)] == doctest::Approx(want).epsilon(1e-12));
    }
  auto rep = finite_difference_check(
      [](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); },
      {Tensor::randn({4, 4}, rng, 1.0), Tensor::randn({4, 4}, rng, 1.0)});
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("matmul: shape mismatch names both shapes") {
  Tensor a({2, 3});
  Tensor b({4, 2});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("(2x3)"), Error);
  try {
    matmul(a, b);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("(4x2)") != std::string::npos);
  }
}

TEST_CASE("softmax: all-equal row is uniform") {
  Tensor x = Tensor::from_data({1, 4}, {0.7, 0.7, 0.7, 0.7});
  Tensor y = softmax(x, 1);
  for (int64_t i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax: [0, ln 3] -> [0.25, 0.75]") {
  Tensor x = Tensor::from_data({1, 2}, {0.0, std::log(3.0)});
  Tensor y = softmax(x, 1);
  CHECK(y.data()[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(y.data()[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax: shift invariance and row sums") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = Tensor::randn({3, 7}, rng, 3.0);
    Tensor shifted(x.shape());
    const double c = rng.uniform(-50.0, 50.0);
    for (int64_t i = 0; i < x.size(); ++i) shifted.data()[i] = x.data()[i] + c;
    Tensor y1 = softmax(x, 1);
    Tensor y2 = softmax(shifted, 1);
    for (int64_t i = 0; i < x.size(); ++i) CHECK(y1.data()[i] == doctest::Approx(y2.data()[i]).epsilon(1e-9));
    for (int64_t r = 0; r < 3; ++r) {
      double sum = 0.0;
      for (int64_t j = 0; j < 7; ++j) sum += y1.data()[static_cast<size_t>(r * 7 + j)];
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("softmax: invalid axis") {
  Tensor x({2, 2});
  CHECK_THROWS_AS(softmax(x, 2), Error);
}

TEST_CASE("gelu: zero maps to zero, symmetry identity, large-x asymptote") {
  Tensor zero = Tensor::from_data({1}, {0.0});
  CHECK(gelu(zero).data()[0] == 0.0);
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const double v = rng.uniform(-8.0, 8.0);
    Tensor x = Tensor::from_data({1}, {v});
    Tensor nx = Tensor::from_data({1}, {-v});
    CHECK(gelu(x).data()[0] + gelu(nx).data()[0] == doctest::Approx(v).epsilon(1e-12));
  }
  for (double v : {6.0, 7.5, 11.0}) {
    Tensor x = Tensor::from_data({1}, {v});
    CHECK(std::abs(gelu(x).data()[0] - v) < 1e-6);
  }
}

TEST_CASE("conv2d: 1x1 unit kernel is the identity map") {
  Rng rng(7);
  Tensor x = Tensor::randn({1, 5, 5}, rng, 1.0);
  Tensor w = Tensor::from_data({1, 1, 1, 1}, {1.0});
  Tensor y = conv2d(x, w, nullptr, 1, 0);
  for (int64_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d: 3x3 ones kernel on impulse gives a 3x3 block of ones") {
  Tensor x({1, 5, 5});
  x.data()[2 * 5 + 2] = 1.0;
  Tensor w({1, 1, 3, 3}, 1.0);
  Tensor y = conv2d(x, w, nullptr, 1, 1);
  CHECK(y.shape() == std::vector<int64_t>{1, 5, 5});
  int ones = 0;
  for (int64_t v = 0; v < 5; ++v)
    for (int64_t u = 0; u < 5; ++u) {
      const double got = y.data()[static_cast<size_t>(v * 5 + u)];
      if (std::abs(v - 2) <= 1 && std::abs(u - 2) <= 1) {
        CHECK(got == 1.0);
        ++ones;
      } else {
        CHECK(got == 0.0);
      }
    }
  CHECK(ones == 9);
}

TEST_CASE("conv2d: non-integral output extent is a configuration error") {
  Tensor x({1, 5, 5});
  Tensor w({1, 1, 2, 2});
  CHECK_THROWS_AS(conv2d(x, w, nullptr, 2, 0), Error);
  // kernel channel mismatch
  Tensor w2({1, 2, 2, 2});
  CHECK_THROWS_AS(conv2d(x, w2, nullptr, 1, 0), Error);
}

TEST_CASE("conv2d: gradient matches central differences") {
  Rng rng(8);
  auto rep = finite_difference_check(
      [](const std::vector<Tensor>& in) { return conv2d(in[0], in[1], &in[2], 2, 1); },
      {Tensor::randn({2, 5, 5}, rng, 1.0), Tensor::randn({3, 2, 3, 3}, rng, 0.4),
       Tensor::randn({3}, rng, 0.2)});
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("transpose_conv2d: stride-2 2x2 ones kernel on 1x1 impulse") {
  Tensor x = Tensor::from_data({1, 1, 1}, {1.0});
  Tensor w({1, 1, 2, 2}, 1.0);
  Tensor y = transpose_conv2d(x, w, nullptr, 2);
  CHECK(y.shape() == std::vector<int64_t>{1, 2, 2});
  for (int64_t i = 0; i < 4; ++i) CHECK(y.data()[i] == 1.0);
}

TEST_CASE("transpose_conv2d: 24x24 -> 48x48 with stride 2, k=2") {
  Tensor x({3, 24, 24});
  Tensor w({3, 3, 2, 2});
  Tensor y = transpose_conv2d(x, w, nullptr, 2);
  CHECK(y.shape() == std::vector<int64_t>{3, 48, 48});
}

TEST_CASE("transpose_conv2d is the exact adjoint of conv2d") {
  Rng rng(9);
  for (int trial = 0; trial < 8; ++trial) {
    const int64_t c = 1 + rng.uniform_int(3);
    const int64_t oc = 1 + rng.uniform_int(3);
    const int64_t k = 1 + rng.uniform_int(3);
    const int64_t stride = 1 + rng.uniform_int(2);
    const int64_t oh = 1 + rng.uniform_int(5);
    const int64_t h = (oh - 1) * stride + k;
    Tensor x = Tensor::randn({c, h, h}, rng, 1.0);
    Tensor w = Tensor::randn({oc, c, k, k}, rng, 0.5);
    Tensor y = Tensor::randn({oc, oh, oh}, rng, 1.0);

    const Tensor cx = conv2d(x, w, nullptr, stride, 0);
    const Tensor ty = transpose_conv2d(y, w, nullptr, stride);
    REQUIRE(cx.shape() == y.shape());
    REQUIRE(ty.shape() == x.shape());
    double lhs = 0.0, rhs = 0.0;
    for (int64_t i = 0; i < cx.size(); ++i) lhs += cx.data()[i] * y.data()[i];
    for (int64_t i = 0; i < x.size(); ++i) rhs += x.data()[i] * ty.data()[i];
    CHECK(std::abs(lhs - rhs) < 1e-8 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("transpose_conv2d: gradient matches central differences") {
  Rng rng(10);
  auto rep = finite_difference_check(
      [](const std::vector<Tensor>& in) { return transpose_conv2d(in[0], in[1], &in[2], 2); },
      {Tensor::randn({2, 4, 4}, rng, 1.0), Tensor::randn({2, 3, 2, 2}, rng, 0.4),
       Tensor::randn({3}, rng, 0.2)});
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("resample: factor table") {
  CHECK(resample_factor_from(16, 4) == ResampleFactor::x4);
  CHECK(resample_factor_from(16, 8) == ResampleFactor::x2);
  CHECK(resample_factor_from(16, 16) == ResampleFactor::x1);
  CHECK(resample_factor_from(16, 32) == ResampleFactor::half);
  CHECK(resample_factor_from(8, 32) == ResampleFactor::quarter);
  CHECK_THROWS_AS(resample_factor_from(16, 5), Error);
}

TEST_CASE("resample: unit factor returns the identical shape (and tensor)") {
  Rng rng(11);
  Tensor x = Tensor::randn({2, 6, 6}, rng, 1.0);
  Tensor w;
  Tensor y = resample(x, ResampleFactor::x1, w, nullptr);
  CHECK(y.shape() == x.shape());
  for (int64_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("resample: 24x24 up by 4 is 96x96, down by 2 is 12x12") {
  Rng rng(12);
  Tensor x = Tensor::randn({2, 24, 24}, rng, 1.0);
  Tensor w4 = Tensor::randn({2, 2, 4, 4}, rng, 0.2);
  Tensor b({2});
  CHECK(resample(x, ResampleFactor::x4, w4, &b).shape() == std::vector<int64_t>{2, 96, 96});
  Tensor wh = Tensor::randn({2, 2, 2, 2}, rng, 0.2);
  CHECK(resample(x, ResampleFactor::half, wh, &b).shape() == std::vector<int64_t>{2, 12, 12});
  CHECK(resample_extent(ResampleFactor::x4, 24) == 96);
  CHECK(resample_extent(ResampleFactor::half, 24) == 12);
}

TEST_CASE("layer_norm: normalizes rows and differentiates") {
  Rng rng(13);
  Tensor x = Tensor::randn({4, 8}, rng, 3.0);
  Tensor g({8}, 1.0);
  Tensor b({8}, 0.0);
  Tensor y = layer_norm(x, g, b);
  for (int64_t r = 0; r < 4; ++r) {
    double mean = 0.0;
    for (int64_t c = 0; c < 8; ++c) mean += y.data()[static_cast<size_t>(r * 8 + c)];
    CHECK(std::abs(mean / 8.0) < 1e-12);
  }
}

TEST_CASE("reverse mode: gradients accumulate across uses") {
  Tensor x = Tensor::from_data({1}, {3.0}, true);
  Tensor y = add(mul(x, x), x);  // x^2 + x, dy/dx = 2x + 1 = 7
  sum_all(y).backward();
  CHECK(x.grad()[0] == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("NoGradGuard suppresses tape recording") {
  Tensor x = Tensor::from_data({1}, {2.0}, true);
  NoGradGuard ng;
  Tensor y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("finite_difference_check: every elementwise op under 1e-4") {
  Rng rng(14);
  auto rep = finite_difference_check(
      [](const std::vector<Tensor>& in) { return gelu(in[0]); }, {Tensor::randn({64}, rng, 1.5)});
  CHECK(rep.max_rel_error < 1e-4);
  rep = finite_difference_check(
      [](const std::vector<Tensor>& in) { return relu(in[0]); }, {Tensor::randn({64}, rng, 1.5)});
  CHECK(rep.max_rel_error < 1e-4);
  rep = finite_difference_check(
      [](const std::vector<Tensor>& in) { return mul(softmax(in[0], 1), in[1]); },
      {Tensor::randn({4, 8}, rng, 1.0), Tensor::randn({4, 8}, rng, 1.0)});
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("structural ops: round trips") {
  Rng rng(15);
  Tensor tokens = Tensor::randn({12, 5}, rng, 1.0);
  Tensor map = spatialize(tokens, 3, 4);
  CHECK(map.shape() == std::vector<int64_t>{5, 3, 4});
  Tensor back = flatten_tokens(map);
  for (int64_t i = 0; i < tokens.size(); ++i) CHECK(back.data()[i] == tokens.data()[i]);
  CHECK_THROWS_AS(spatialize(tokens, 3, 5), Error);

  Tensor img = Tensor::randn({3, 6, 6}, rng, 1.0);
  Tensor rows = patchify(img, 3);
  CHECK(rows.shape() == std::vector<int64_t>{4, 27});
  // first patch row holds channel-major 3x3 blocks from the top-left corner
  CHECK(rows.data()[0] == img.data()[0]);
  CHECK(rows.data()[1] == img.data()[1]);
  CHECK(rows.data()[3] == img.data()[6]);
}
