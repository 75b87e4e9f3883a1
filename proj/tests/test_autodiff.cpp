// SPDX-License-Identifier: Apache-2.0
//
// sblu: sparse Bayesian learning and its deep-unfolded variants for wideband
// hybrid mmWave massive MIMO channel estimation.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <catch_amalgamated.hpp>

#include "sblu/autodiff.hpp"

using namespace sblu;
using namespace sblu::ad;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Tensor randn(Shape s, Rng& rng, double sd = 1.0)
{
    Tensor t(std::move(s));
    for (auto& v : t.data)
        v = sd * rng.normal();
    return t;
}

// random linear functional so that non-scalar ops can be checked; weights kept
// away from zero so relative errors are not dominated by near-zero gradients
Var probe(const Var& out, std::uint64_t seed)
{
    Rng rng(seed);
    Tensor w(out.shape());
    for (auto& v : w.data)
        v = (rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
    return sum(mul(out, constant(w)));
}

Tensor well_conditioned(std::size_t n, Rng& rng)
{
    Tensor t = randn({n, n, 2}, rng, 0.3);
    for (std::size_t i = 0; i < n; ++i)
        t[2 * (i * n + i)] += 3.0;
    return t;
}

// circular shift along axis 0 of a (D0, D1, D2, C) tensor
Tensor roll0(const Tensor& t, std::size_t s)
{
    Tensor out(t.shape);
    const std::size_t block = t.size() / t.shape[0];
    for (std::size_t i = 0; i < t.shape[0]; ++i)
        std::copy_n(t.data.begin() + i * block, block, out.data.begin() + ((i + s) % t.shape[0]) * block);
    return out;
}

} // namespace

TEST_CASE("primitive examples")
{
    SECTION("relu backward")
    {
        auto x = parameter(Tensor({2}, {-1.0, 2.0}));
        backward(sum(relu(x)));
        CHECK(x.grad().data == std::vector<double>{0.0, 1.0});
    }
    SECTION("linear_solve on a diagonal system")
    {
        Tensor a({2, 2, 2}, {2, 0, 0, 0, 0, 0, 2, 0});
        auto b = parameter(Tensor({2, 1, 2}, {1.0, -2.0, 4.0, 6.0}));
        auto z = linear_solve(constant(a), b);
        CHECK(z.value().data == std::vector<double>{0.5, -1.0, 2.0, 3.0});
        backward(sum(z));
        for (double g : b.grad().data)
            CHECK_THAT(g, WithinAbs(0.5, 1e-15));
    }
    SECTION("squared modulus")
    {
        auto z = parameter(Tensor({1, 2}, {3.0, 4.0}));
        auto m = sq_modulus(z);
        CHECK(m.item() == 25.0);
        backward(sum(m));
        CHECK(z.grad().data == std::vector<double>{6.0, 8.0});
    }
    SECTION("sum gives all-ones")
    {
        Rng rng(1);
        auto x = parameter(randn({3, 4}, rng));
        backward(sum(x));
        for (double g : x.grad().data)
            CHECK(g == 1.0);
    }
}

TEST_CASE("backward semantics")
{
    Rng rng(2);
    SECTION("least squares gradient matches 2A^T(Ax - b)")
    {
        const Tensor a = randn({5, 3}, rng), b = randn({5, 1}, rng), x0 = randn({3, 1}, rng);
        auto x = parameter(x0);
        auto r = sub(matmul(constant(a), x), constant(b));
        backward(sum(mul(r, r)));
        const RVector expect = 2.0 * detail::rmap(a).transpose() * (detail::rmap(a) * detail::rmap(x0) - detail::rmap(b));
        for (int i = 0; i < 3; ++i)
            CHECK_THAT(x.grad()[i], WithinAbs(expect(i), 1e-12));
    }
    SECTION("repeated calls accumulate")
    {
        auto x = parameter(randn({4}, rng));
        auto loss = sum(mul(x, x));
        backward(loss);
        const auto once = x.grad().data;
        backward(loss);
        for (std::size_t i = 0; i < once.size(); ++i)
            CHECK_THAT(x.grad()[i], WithinAbs(2.0 * once[i], 1e-15));
        std::vector<Var> ps{x};
        zero_grad(ps);
        CHECK(x.grad()[0] == 0.0);
    }
    SECTION("non-scalar loss is rejected")
    {
        auto x = parameter(randn({2}, rng));
        CHECK_THROWS_AS(backward(relu(x)), DimensionError);
    }
    SECTION("constants receive nothing")
    {
        auto c = constant(randn({3}, rng));
        auto x = parameter(randn({3}, rng));
        backward(sum(mul(c, x)));
        CHECK_FALSE(c.requires_grad());
        CHECK(c.node()->grad.size() == 0);
    }
    SECTION("forward does not mutate inputs and is repeatable")
    {
        const Tensor a0 = randn({3, 3, 2}, rng);
        auto a = constant(a0);
        auto z1 = linear_solve(a, a);
        auto z2 = linear_solve(a, a);
        CHECK(a.value().data == a0.data);
        CHECK(z1.value().data == z2.value().data);
    }
}

TEST_CASE("grad_check calibration")
{
    Rng rng(3);
    SECTION("linear function")
    {
        auto x = parameter(randn({6}, rng));
        CHECK(grad_check([&] { return probe(x, 11); }, {x}) < 1e-8);
    }
    SECTION("sigmoid chain of depth 3")
    {
        auto x = parameter(randn({6}, rng));
        CHECK(grad_check([&] { return probe(sigmoid(sigmoid(sigmoid(x))), 12); }, {x}) < 1e-6);
    }
    SECTION("conv3d with circular padding")
    {
        auto x = parameter(randn({5, 4, 3, 2}, rng));
        auto w = parameter(randn({3, 3, 3, 2, 3}, rng));
        auto b = parameter(randn({3}, rng));
        auto f = [&] { return probe(conv3d(x, w, b, {Padding::Circular, Padding::Circular, Padding::Zero}), 13); };
        CHECK(grad_check(f, {x, w, b}) < 1e-5);
    }
}

TEST_CASE("every primitive passes grad_check")
{
    Rng rng(4);
    auto cm = [&](std::size_t r, std::size_t c) { return parameter(randn({r, c, 2}, rng)); };

    SECTION("exact ops")
    {
        auto a = parameter(randn({3, 4}, rng));
        auto b = parameter(randn({3, 4}, rng));
        auto m = parameter(randn({4, 2}, rng));
        auto z = cm(3, 4), u = cm(4, 2), s = cm(2, 2), s4 = cm(4, 4);
        auto r4 = parameter(randn({4}, rng));
        auto r34 = parameter(randn({3, 4}, rng));
        const double tol = 1e-8;
        CHECK(grad_check([&] { return probe(add(a, b), 1); }, {a, b}) < tol);
        CHECK(grad_check([&] { return probe(sub(a, b), 2); }, {a, b}) < tol);
        CHECK(grad_check([&] { return probe(mul(a, b), 3); }, {a, b}) < tol);
        CHECK(grad_check([&] { return probe(scale(a, -1.7), 4); }, {a}) < tol);
        CHECK(grad_check([&] { return probe(matmul(a, m), 5); }, {a, m}) < tol);
        CHECK(grad_check([&] { return probe(cmatmul(z, u), 6); }, {z, u}) < tol);
        CHECK(grad_check([&] { return probe(conj_transpose(z), 7); }, {z}) < tol);
        CHECK(grad_check([&] { return probe(conj(z), 8); }, {z}) < tol);
        CHECK(grad_check([&] { return probe(reshape(z, {6, 2, 2}), 9); }, {z}) < tol);
        CHECK(grad_check([&] { return probe(permute(z, {1, 2, 0}), 10); }, {z}) < tol);
        CHECK(grad_check([&] { return probe(slice(z, 1, 1, 2), 11); }, {z}) < tol);
        CHECK(grad_check([&] { return probe(concat({a, b, a}, 1), 12); }, {a, b}) < tol);
        CHECK(grad_check([&] { return probe(mean_axes(z, {0, 2}), 13); }, {z}) < tol);
        CHECK(grad_check([&] { return probe(sq_modulus(z), 14); }, {z}) < tol);
        CHECK(grad_check([&] { return probe(cmul_real(z, r34), 15); }, {z, r34}) < tol);
        CHECK(grad_check([&] { return probe(scale_cols(z, r4), 16); }, {z, r4}) < tol);
        CHECK(grad_check([&] { return probe(re_inner_cols(z, cmatmul(z, s4)), 17); }, {z}) < tol);
        CHECK(grad_check([&] { return probe(ckron(s, u), 18); }, {s, u}) < tol);
        CHECK(grad_check([&] { return probe(kron_identity(s, 3), 19); }, {s}) < tol);
        CHECK(grad_check([&] { return sum(a); }, {a}) < tol);
    }
    SECTION("smooth nonlinear ops")
    {
        auto x = parameter(randn({3, 4}, rng));
        CHECK(grad_check([&] { return probe(sigmoid(x), 21); }, {x}) < 1e-5);
        CHECK(grad_check([&] { return probe(phase_to_complex(x, 0.5), 22); }, {x}) < 1e-5);
        // keep relu inputs away from the kink
        Tensor t = randn({3, 4}, rng);
        for (auto& v : t.data)
            v += v > 0 ? 0.1 : -0.1;
        auto y = parameter(t);
        CHECK(grad_check([&] { return probe(relu(y), 23); }, {y}) < 1e-5);
        auto xz = parameter(randn({4, 3, 2, 2}, rng));
        auto w = parameter(randn({3, 3, 3, 2, 2}, rng));
        auto b = parameter(randn({2}, rng));
        CHECK(grad_check([&] { return probe(conv3d(xz, w, b, {Padding::Zero, Padding::Circular, Padding::Zero}), 24); },
                         {xz, w, b}) < 1e-5);
    }
    SECTION("solve-based ops")
    {
        auto a = parameter(well_conditioned(4, rng));
        auto b = cm(4, 3);
        CHECK(grad_check([&] { return probe(linear_solve(a, b), 31); }, {a, b}) < 1e-4);
        CHECK(grad_check([&] { return sum(sq_modulus(linear_solve(a, b))); }, {a, b}) < 1e-4);
    }
}

TEST_CASE("shape errors")
{
    Rng rng(5);
    auto a = constant(randn({2, 3}, rng));
    auto b = constant(randn({3, 2}, rng));
    CHECK_THROWS_AS(add(a, b), DimensionError);
    CHECK_THROWS_AS(matmul(a, a), DimensionError);
    CHECK_THROWS_AS(cmatmul(a, b), DimensionError);
    CHECK_THROWS_AS(reshape(a, {4}), DimensionError);
    CHECK_THROWS_AS(permute(a, {0, 0}), DimensionError);
    CHECK_THROWS_AS(slice(a, 1, 2, 2), DimensionError);
    CHECK_THROWS_AS(concat({a, b}, 0), DimensionError);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>(3)), DimensionError);
    auto x = constant(randn({4, 4, 4, 2}, rng));
    auto w_even = constant(randn({2, 3, 3, 2, 1}, rng));
    auto w_ch = constant(randn({3, 3, 3, 3, 1}, rng));
    auto bias = constant(Tensor({1}));
    CHECK_THROWS_AS(conv3d(x, w_even, bias, {Padding::Zero, Padding::Zero, Padding::Zero}), DimensionError);
    CHECK_THROWS_AS(conv3d(x, w_ch, bias, {Padding::Zero, Padding::Zero, Padding::Zero}), DimensionError);
}

TEST_CASE("linear_solve")
{
    Rng rng(6);
    SECTION("solve(A, A X) recovers X")
    {
        const Tensor a = well_conditioned(6, rng), x = randn({6, 3, 2}, rng);
        auto ax = cmatmul(constant(a), constant(x));
        auto z = linear_solve(constant(a), ax);
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK_THAT(z.value()[i], WithinAbs(x[i], 1e-10));
    }
    SECTION("singular matrix")
    {
        Tensor a({2, 2, 2}, {1, 0, 2, 0, 2, 0, 4, 0});
        CHECK_THROWS_AS(linear_solve(constant(a), constant(Tensor({2, 1, 2}))), DegenerateSystemError);
    }
}

TEST_CASE("conv3d structure")
{
    Rng rng(7);
    const Tensor x = randn({6, 5, 3, 2}, rng);
    auto w = constant(randn({3, 3, 3, 2, 4}, rng));
    auto b = constant(randn({4}, rng));
    const std::array<Padding, 3> pads{Padding::Circular, Padding::Circular, Padding::Zero};

    SECTION("zero padding keeps the subcarrier length")
    {
        auto y = conv3d(constant(x), w, b, pads);
        CHECK(y.shape() == Shape{6, 5, 3, 4});
    }
    SECTION("circular shift equivariance on the angular axes")
    {
        for (std::size_t s : {1u, 2u, 5u}) {
            auto lhs = conv3d(constant(roll0(x, s)), w, b, pads);
            const Tensor rhs = roll0(conv3d(constant(x), w, b, pads).value(), s);
            for (std::size_t i = 0; i < rhs.size(); ++i)
                REQUIRE_THAT(lhs.value()[i], WithinAbs(rhs[i], 1e-12));
        }
        // second angular axis: permute so that it leads, shift, permute back
        auto xp = permute(constant(x), {1, 0, 2, 3});
        const Tensor xs = permute(constant(roll0(xp.value(), 2)), {1, 0, 2, 3}).value();
        auto lhs = permute(conv3d(constant(xs), w, b, pads), {1, 0, 2, 3});
        const Tensor rhs = roll0(permute(conv3d(constant(x), w, b, pads), {1, 0, 2, 3}).value(), 2);
        for (std::size_t i = 0; i < rhs.size(); ++i)
            REQUIRE_THAT(lhs.value()[i], WithinAbs(rhs[i], 1e-12));
    }
    SECTION("zero padding breaks equivariance")
    {
        const std::array<Padding, 3> zp{Padding::Zero, Padding::Zero, Padding::Zero};
        auto lhs = conv3d(constant(roll0(x, 1)), w, b, zp);
        const Tensor rhs = roll0(conv3d(constant(x), w, b, zp).value(), 1);
        double diff = 0.0;
        for (std::size_t i = 0; i < rhs.size(); ++i)
            diff = std::max(diff, std::abs(lhs.value()[i] - rhs[i]));
        CHECK(diff > 1e-3);
    }
    SECTION("1x1x1 identity kernel copies the input")
    {
        Tensor id({1, 1, 1, 2, 2});
        id[0] = id[3] = 1.0;
        auto y = conv3d(constant(x), constant(id), constant(Tensor({2})), pads);
        CHECK(y.value().data == x.data);
    }
}

TEST_CASE("mean over axes")
{
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(mean_axes(constant(t), {1}).value().data == std::vector<double>{2.0, 5.0});
    CHECK(mean_axes(constant(t), {0}).value().data == std::vector<double>{2.5, 3.5, 4.5});
    CHECK(mean_axes(constant(t), {0, 1}).item() == 3.5);
}

TEST_CASE("adam")
{
    SECTION("zero gradient leaves parameters unchanged")
    {
        std::vector<Var> ps{parameter(Tensor({3}, {1.0, -2.0, 0.5}))};
        const auto before = ps[0].value().data;
        AdamState st;
        zero_grad(ps);
        adam_step(ps, st);
        CHECK(ps[0].value().data == before);
    }
    SECTION("first step with constant gradient")
    {
        std::vector<Var> ps{parameter(Tensor({3}, {0.0, 0.0, 0.0}))};
        ps[0].grad().data = {0.3, -2.0, 1e-3};
        AdamState st;
        st.lr = 0.01;
        adam_step(ps, st);
        for (std::size_t i = 0; i < 3; ++i) {
            const double g = ps[0].grad()[i];
            CHECK_THAT(ps[0].value()[i], WithinRel(-st.lr * g / (std::abs(g) + st.eps), 1e-12));
        }
    }
    SECTION("quadratic bowl")
    {
        std::vector<Var> ps{parameter(Tensor({2}, {1.0, -0.5}))};
        AdamState st;
        st.lr = 1e-2;
        for (int k = 0; k < 500; ++k) {
            zero_grad(ps);
            backward(sum(mul(ps[0], ps[0])));
            adam_step(ps, st);
        }
        CHECK(std::abs(ps[0].value()[0]) < 1e-3);
        CHECK(std::abs(ps[0].value()[1]) < 1e-3);
    }
    SECTION("frozen parameters are skipped")
    {
        std::vector<Var> ps{parameter(Tensor({1}, {1.0}))};
        ps[0].grad()[0] = 1.0;
        ps[0].set_requires_grad(false);
        AdamState st;
        adam_step(ps, st);
        CHECK(ps[0].value()[0] == 1.0);
    }
}

TEST_CASE("xavier_init")
{
    Rng rng(8);
    SECTION("bound for fan 3/3 is 1")
    {
        const Tensor t = xavier_init({3, 3}, rng);
        for (double v : t.data)
            CHECK(std::abs(v) <= 1.0);
    }
    SECTION("variance 2/(fan_in + fan_out)")
    {
        const Tensor t = xavier_init({5, 5, 5, 4, 8}, rng); // fans 500 / 1000
        std::size_t n = 0;
        double s = 0.0, s2 = 0.0;
        Rng r2(9);
        for (int rep = 0; rep < 25; ++rep) {
            const Tensor u = xavier_init({5, 5, 5, 4, 8}, r2);
            for (double v : u.data) {
                s += v;
                s2 += v * v;
                ++n;
            }
        }
        const double var = s2 / n - (s / n) * (s / n);
        CHECK(n >= 100000);
        CHECK_THAT(var, WithinRel(2.0 / 1500.0, 0.05));
        CHECK(t.size() == 4000);
    }
    SECTION("same seed, same tensor")
    {
        Rng a(42), b(42);
        CHECK(xavier_init({4, 6}, a).data == xavier_init({4, 6}, b).data);
    }
    SECTION("rank 1 has no fan split")
    {
        CHECK_THROWS_AS(xavier_init({4}, rng), DimensionError);
    }
}
