#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "prednet/checkpoint.hpp"
#include "prednet/tensor.hpp"

using namespace prednet;

namespace {

template <class Real>
TensorPtrT<Real> vec(std::initializer_list<Real> v, bool grad = false) {
    return make_tensor<Real>({static_cast<int>(v.size())}, std::vector<Real>(v), grad);
}

}  // namespace

TEST_SUITE_BEGIN("autograd");

TEST_CASE("elementwise forward examples") {
    auto r = relu(vec<float>({-1.0f, 0.0f, 2.0f}));
    CHECK(r->data == std::vector<float>{0.0f, 0.0f, 2.0f});

    auto s = sigmoid(vec<float>({0.0f}));
    CHECK(s->data[0] == doctest::Approx(0.5f));

    auto a = add(vec<float>({1.0f, 2.0f}), vec<float>({3.0f, 4.0f}));
    CHECK(a->data == std::vector<float>{4.0f, 6.0f});

    auto via_dispatch = elementwise(EwKind::add, vec<float>({1.0f, 2.0f}), vec<float>({3.0f, 4.0f}));
    CHECK(via_dispatch->data == a->data);
}

TEST_CASE("elementwise errors") {
    CHECK_THROWS_AS(add(vec<float>({1.0f, 2.0f}), vec<float>({1.0f})), DimensionError);
    CHECK_THROWS_AS(elementwise<float>(EwKind::mul, vec<float>({1.0f})), ContractError);
    // overflow to infinity must not leave the engine
    auto big = vec<float>({3e38f});
    CHECK_THROWS_AS(scale(big, 10.0f), NumericError);
    CHECK_THROWS_AS(make_tensor<float>({1}, {std::numeric_limits<float>::quiet_NaN()}), NumericError);
}

TEST_CASE("backward basics") {
    auto x = vec<float>({3.0f}, true);
    auto l = mul(x, x);
    backward(l);
    CHECK(x->grad[0] == doctest::Approx(6.0f));

    auto y = vec<float>({-1.0f}, true);
    auto l2 = relu(y);
    backward(l2);
    CHECK(y->grad[0] == 0.0f);

    auto z = vec<float>({0.0f}, true);
    auto l3 = sigmoid(z);
    backward(l3);
    CHECK(z->grad[0] == doctest::Approx(0.25f));
    CHECK(l3->grad[0] == 1.0f);  // d(loss)/d(loss)
}

TEST_CASE("backward contract errors and disconnected leaves") {
    auto x = vec<float>({1.0f, 2.0f}, true);
    CHECK_THROWS_AS(backward(add(x, x)), ContractError);  // non-scalar loss

    auto used = vec<float>({2.0f}, true);
    auto unused = vec<float>({5.0f}, true);
    backward(mul(used, used));
    REQUIRE(unused->grad.size() == 1);  // zero-filled, not absent
    CHECK(unused->grad[0] == 0.0f);
}

TEST_CASE("backward determinism") {
    std::mt19937 rng(7);
    auto x = uniform_tensor<float>({16}, -1.0f, 1.0f, rng, true);
    auto f = [&] { return mean_all(mul(sigmoid(x), tanh_op(scale(x, 0.7f)))); };
    backward(f());
    std::vector<float> g1 = x->grad;
    x->zero_grad();
    backward(f());
    CHECK(x->grad == g1);  // bit-identical
}

TEST_CASE("gradient linearity across summed sub-losses") {
    std::mt19937 rng(11);
    auto x = uniform_tensor<float>({8}, -1.0f, 1.0f, rng, true);
    auto f1 = sum_all(mul(x, x));
    auto f2 = sum_all(sigmoid(x));
    backward(add(f1, f2));
    std::vector<float> combined = x->grad;

    x->zero_grad();
    backward(sum_all(mul(x, x)));
    std::vector<float> g1 = x->grad;
    x->zero_grad();
    backward(sum_all(sigmoid(x)));
    std::vector<float> g2 = x->grad;
    for (std::size_t i = 0; i < combined.size(); ++i)
        CHECK(combined[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-5));
}

TEST_CASE("grad_check oracle examples (double path)") {
    std::mt19937 rng(3);
    auto x = uniform_tensor<double>({16}, -1.0, 1.0, rng, true);
    ScalarFn<double> f_sq = [](const std::vector<TensorPtrT<double>>& in) { return sum_all(mul(in[0], in[0])); };
    CHECK(grad_check<double>(f_sq, {x}, 1e-4) < 1e-6);

    auto y = uniform_tensor<double>({16}, -2.0, 2.0, rng, true);
    ScalarFn<double> f_sig = [](const std::vector<TensorPtrT<double>>& in) { return sum_all(sigmoid(in[0])); };
    CHECK(grad_check<double>(f_sig, {y}, 1e-4) < 1e-5);

    ScalarFn<double> f_const = [](const std::vector<TensorPtrT<double>>&) {
        return make_tensor<double>({1}, {4.0});
    };
    CHECK(grad_check<double>(f_const, {x}, 1e-4) == 0.0);
}

TEST_CASE("grad_check on the float path stays within the single-precision bound") {
    for (std::uint32_t seed : {1u, 2u, 3u, 4u, 5u}) {
        std::mt19937 rng(seed);
        auto x = uniform_tensor<float>({24}, -1.5f, 1.5f, rng, true);
        ScalarFn<float> f = [](const std::vector<TensorPtr>& in) {
            return mean_all(mul(tanh_op(in[0]), sigmoid(scale(in[0], 0.5f))));
        };
        CHECK(grad_check<float>(f, {x}, 1e-4f) < 1e-3);
    }
}

TEST_CASE("grad_check rejects bad arguments") {
    auto x = vec<float>({1.0f}, true);
    ScalarFn<float> f = [](const std::vector<TensorPtr>& in) { return sum_all(in[0]); };
    CHECK_THROWS_AS(grad_check<float>(f, {x}, 0.0f), ContractError);
    ScalarFn<float> bad = [](const std::vector<TensorPtr>& in) { return add(in[0], in[0]); };
    auto x2 = vec<float>({1.0f, 2.0f}, true);
    CHECK_THROWS_AS(grad_check<float>(bad, {x2}, 1e-4f), ContractError);
}

TEST_CASE("tape visits each node once in reverse topological order") {
    auto x = vec<float>({2.0f}, true);
    auto a = mul(x, x);
    auto b = add(a, x);
    auto l = mul(b, a);  // diamond: a feeds both b and l
    TapeT<float> tape = build_tape(l);
    CHECK(tape.nodes.back() == l.get());
    std::size_t seen_a = 0;
    for (auto* n : tape.nodes)
        if (n == a.get()) ++seen_a;
    CHECK(seen_a == 1);
    // d/dx of (x^2 + x) * x^2 = 4x^3 + 3x^2 at x=2
    backward(l);
    CHECK(x->grad[0] == doctest::Approx(4 * 8 + 3 * 4).epsilon(1e-5));
}

TEST_CASE("concat and slice round the gradient through channel blocks") {
    std::mt19937 rng(5);
    auto a = uniform_tensor<float>({2, 2, 2}, -1.0f, 1.0f, rng, true);
    auto b = uniform_tensor<float>({1, 2, 2}, -1.0f, 1.0f, rng, true);
    auto cat = concat_channels<float>({a, b});
    REQUIRE(cat->shape == Shape{3, 2, 2});
    backward(mean_all(slice_channels(cat, 2, 3)));
    for (float g : a->grad) CHECK(g == 0.0f);
    for (float g : b->grad) CHECK(g == doctest::Approx(0.25f));
}

TEST_CASE("checkpoint container round-trips bit-exactly") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        ArrayMap arrays;
        std::uniform_int_distribution<int> n_arrays(1, 4), rank_d(1, 4), ext_d(1, 5);
        std::uniform_real_distribution<float> val(-10.0f, 10.0f);
        const int n = n_arrays(rng);
        for (int i = 0; i < n; ++i) {
            NamedArray arr;
            std::size_t total = 1;
            const int rank = rank_d(rng);
            for (int r = 0; r < rank; ++r) {
                arr.extents.push_back(static_cast<std::uint32_t>(ext_d(rng)));
                total *= arr.extents.back();
            }
            for (std::size_t j = 0; j < total; ++j) arr.data.push_back(val(rng));
            arrays.emplace("arr" + std::to_string(trial) + "_" + std::to_string(i), std::move(arr));
        }
        const std::string path = "pnck_roundtrip.bin";
        write_pnck(arrays, path);
        ArrayMap back = read_pnck(path);
        REQUIRE(back.size() == arrays.size());
        for (const auto& [name, arr] : arrays) {
            REQUIRE(back.count(name) == 1);
            CHECK(back[name].extents == arr.extents);
            CHECK(back[name].data == arr.data);  // bit-exact
        }
    }
}

TEST_CASE("checkpoint format errors") {
    {
        std::ofstream os("pnck_bad.bin", std::ios::binary);
        os << "JUNKDATA";
    }
    CHECK_THROWS_AS(read_pnck("pnck_bad.bin"), FormatError);
    {
        ArrayMap arrays;
        arrays["a"] = NamedArray{{4}, {1, 2, 3, 4}};
        write_pnck(arrays, "pnck_trunc.bin");
        std::ifstream is("pnck_trunc.bin", std::ios::binary);
        std::string all((std::istreambuf_iterator<char>(is)), {});
        std::ofstream os("pnck_trunc.bin", std::ios::binary | std::ios::trunc);
        os.write(all.data(), static_cast<std::streamsize>(all.size() - 6));
    }
    CHECK_THROWS_AS(read_pnck("pnck_trunc.bin"), FormatError);
    CHECK_THROWS_AS(read_pnck("does_not_exist.pnck"), FormatError);
}

TEST_SUITE_END();
