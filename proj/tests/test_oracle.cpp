#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dispatchlab/oracle.hpp"
#include "dispatchlab/tensor.hpp"

using namespace dispatchlab;

TEST_CASE("oracle matmul: identity") {
    auto identity = HostTensor::from({2, 2}, {1, 0, 0, 1});
    auto b = HostTensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    auto r = oracle::matmul(identity, b);
    CHECK(r.data == b.data);
}

TEST_CASE("oracle matmul: dim mismatch") {
    auto a = HostTensor::zeros({2, 3});
    auto b = HostTensor::zeros({4, 2});
    CHECK_THROWS_AS(oracle::matmul(a, b), Error);
}

TEST_CASE("oracle matmul_wt agrees with matmul on transposed weights") {
    auto x = random_tensor({3, 5}, 42);
    auto w = random_tensor({4, 5}, 43);  // [out, in]
    auto wt = HostTensor::zeros({5, 4});
    for (size_t i = 0; i < 4; i++)
        for (size_t j = 0; j < 5; j++) wt.data[j * 4 + i] = w.data[i * 5 + j];
    auto r1 = oracle::matmul_wt(x, w);
    auto r2 = oracle::matmul(x, wt);
    auto cmp = oracle::compare(r1, r2, oracle::ToleranceSpec::single_kernel());
    CHECK(cmp.max_abs_diff < 1e-6);
}

TEST_CASE("oracle softmax: uniform") {
    auto r = oracle::softmax(HostTensor::from({1, 2}, {0, 0}));
    CHECK(r.data[0] == doctest::Approx(0.5));
    CHECK(r.data[1] == doctest::Approx(0.5));
}

TEST_CASE("oracle rmsnorm: hand-computed row") {
    // x=[3,4], eps=0, weight=1: scale = rsqrt(25/2) -> [0.8485, 1.1314]
    auto x = HostTensor::from({1, 2}, {3, 4});
    auto w = HostTensor::full({2}, 1.0f);
    auto r = oracle::rmsnorm(x, w, 0.0);
    CHECK(r.data[0] == doctest::Approx(3.0 / std::sqrt(12.5)).epsilon(1e-6));
    CHECK(r.data[1] == doctest::Approx(4.0 / std::sqrt(12.5)).epsilon(1e-6));
    CHECK(r.data[0] == doctest::Approx(0.8485).epsilon(1e-4));
    CHECK(r.data[1] == doctest::Approx(1.1314).epsilon(1e-4));
}

TEST_CASE("oracle argmax: ties go to lowest index") {
    CHECK(oracle::argmax(HostTensor::from({1, 3}, {1, 5, 3})) == 1);
    CHECK(oracle::argmax(HostTensor::from({1, 4}, {7, 7, 7, 7})) == 0);
}

TEST_CASE("oracle mlp_block: zero input is a fixed point") {
    oracle::MlpWeights w;
    w.norm_weight = random_tensor({8}, 1);
    w.gate = random_tensor({16, 8}, 2);
    w.up = random_tensor({16, 8}, 3);
    w.down = random_tensor({8, 16}, 4);
    auto out = oracle::mlp_block(HostTensor::zeros({1, 8}), w, 1e-6);
    for (float v : out.data) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("compare: thresholds and symmetry") {
    auto a = HostTensor::from({1, 3}, {1, 2, 3});
    auto same = oracle::compare(a, a, oracle::ToleranceSpec::single_kernel());
    CHECK(same.max_abs_diff == 0.0);
    CHECK(same.pass);

    auto b = HostTensor::from({1, 3}, {1, 2, 3.0003f});
    auto r = oracle::compare(a, b, oracle::ToleranceSpec::single_kernel());
    CHECK_FALSE(r.pass);  // 3e-4 over a 2e-4 bound
    CHECK(r.argmax_of_diff == 2);
    auto rba = oracle::compare(b, a, oracle::ToleranceSpec::single_kernel());
    CHECK(r.max_abs_diff == doctest::Approx(rba.max_abs_diff));

    auto c = HostTensor::zeros({3, 1});
    CHECK_THROWS_AS(oracle::compare(a, c, oracle::ToleranceSpec::single_kernel()), Error);
}

TEST_CASE("oracle determinism across runs") {
    auto x = random_tensor({7, 9}, 5);
    auto w = random_tensor({11, 9}, 6);
    auto r1 = oracle::matmul_wt(x, w);
    auto r2 = oracle::matmul_wt(x, w);
    CHECK(r1.data == r2.data);
}

TEST_CASE("seeded rng is stable across calls and shapes") {
    auto t1 = random_tensor({4, 4}, 42);
    auto t2 = random_tensor({4, 4}, 42);
    CHECK(t1.data == t2.data);
    auto t3 = random_tensor({4, 4}, 43);
    CHECK(t1.data != t3.data);
    for (float v : t1.data) {
        CHECK(v >= -1.0f);
        CHECK(v < 1.0f);
    }
}
