#include "doctest.h"

#include "polydiff/core/error.hpp"
#include "polydiff/core/gradcheck.hpp"
#include "polydiff/core/instrumentation.hpp"
#include "polydiff/core/kernels.hpp"
#include "polydiff/core/nn.hpp"
#include "polydiff/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

using namespace polydiff;
using namespace polydiff::core;

namespace {

Mat random_mat(Index r, Index c, Rng& rng, double sd = 1.0) {
    std::normal_distribution<double> d(0.0, sd);
    Mat m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
    return m;
}

Tensor mat_tensor(std::initializer_list<std::initializer_list<double>> rows, bool rg = false) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = static_cast<Index>(rows.begin()->size());
    std::vector<double> data;
    for (auto row : rows) data.insert(data.end(), row.begin(), row.end());
    return Tensor::from_data({r, c}, data, rg);
}

// Scalar GELU (tanh form) written out independently of the library.
double gelu_oracle(double x) {
    const double pi = 3.14159265358979323846;
    return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / pi) * (x + 0.044715 * x * x * x)));
}

}  // namespace

TEST_CASE("tensor shape invariants") {
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1, 2, 3}), DimensionError);
    CHECK_THROWS_AS(Tensor::from_data({0, 2}, {}), DimensionError);
    Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.matrix()(1, 2) == 6);
}

TEST_CASE("scaled_dot_attention examples") {
    SUBCASE("single key returns its value") {
        Tensor out = scaled_dot_attention(mat_tensor({{1, 0}}), mat_tensor({{1, 0}}), mat_tensor({{7, 3}}), 1);
        CHECK(out.matrix()(0, 0) == doctest::Approx(7).epsilon(1e-15));
        CHECK(out.matrix()(0, 1) == doctest::Approx(3).epsilon(1e-15));
    }
    SUBCASE("zero query averages values") {
        Tensor out = scaled_dot_attention(mat_tensor({{0, 0}}), mat_tensor({{1, 0}, {0, 1}}),
                                          mat_tensor({{2, 0}, {0, 2}}), 1);
        CHECK(std::abs(out.matrix()(0, 0) - 1.0) < 1e-15);
        CHECK(std::abs(out.matrix()(0, 1) - 1.0) < 1e-15);
    }
    SUBCASE("hand-computed softmax") {
        const double e = std::exp(1.0 / std::sqrt(2.0));
        const double sigma = e / (e + 1.0);
        for (bool taped : {false, true}) {
            Tensor q = mat_tensor({{1, 0}}, taped);
            Tensor out = scaled_dot_attention(q, mat_tensor({{1, 0}, {0, 1}}), mat_tensor({{1, 0}, {0, 1}}), 1);
            CHECK(std::abs(out.matrix()(0, 0) - sigma) < 1e-12);
            CHECK(std::abs(out.matrix()(0, 1) - (1.0 - sigma)) < 1e-12);
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(scaled_dot_attention(mat_tensor({{1, 0, 0}}), mat_tensor({{1, 0}}), mat_tensor({{1, 0}}), 1),
                        DimensionError);
        CHECK_THROWS_AS(scaled_dot_attention(mat_tensor({{1, 0, 0}}), mat_tensor({{1, 0, 0}}),
                                             mat_tensor({{1, 0, 0}}), 2),
                        DimensionError);
        Mat q = Mat::Ones(1, 2), k(0, 2), v(0, 2), out;
        CHECK_THROWS_AS(kernels::attention(q, k, v, 1, out), ArgumentError);
    }
}

TEST_CASE("attention routes agree: reference, blocked, streaming, taped") {
    Rng rng(7);
    const int heads = 4;
    Mat q = random_mat(150, 16, rng), k = random_mat(97, 16, rng), v = random_mat(97, 16, rng);
    Mat ref, blocked;
    kernels::attention_reference(q, k, v, heads, ref);
    kernels::attention(q, k, v, heads, blocked);
    CHECK((ref - blocked).cwiseAbs().maxCoeff() < 1e-12);

    kernels::OnlineAttention online(q, heads);
    for (Index c0 = 0; c0 < k.rows(); c0 += 20) {
        const Index n = std::min<Index>(20, k.rows() - c0);
        online.absorb(k.middleRows(c0, n), v.middleRows(c0, n));
    }
    CHECK((ref - online.finish()).cwiseAbs().maxCoeff() < 1e-12);

    Tensor taped = scaled_dot_attention(Tensor::from_matrix(q, true), Tensor::from_matrix(k), Tensor::from_matrix(v), heads);
    CHECK((ref - taped.to_matrix()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention rows sum to one (instrumentation hook)") {
    Rng rng(3);
    Mat q = random_mat(33, 8, rng, 3.0), k = random_mat(21, 8, rng, 3.0), v = random_mat(21, 8, rng);
    double worst = 0.0;
    Index blocks_seen = 0;
    instrumentation().attention_weights_hook = [&](const Mat& w) {
        ++blocks_seen;
        worst = std::max(worst, (w.rowwise().sum().array() - 1.0).abs().maxCoeff());
    };
    Mat out;
    kernels::attention(q, k, v, 2, out);
    scaled_dot_attention(Tensor::from_matrix(q, true), Tensor::from_matrix(k), Tensor::from_matrix(v), 2);
    instrumentation().attention_weights_hook = nullptr;
    CHECK(blocks_seen >= 4);
    CHECK(worst < 1e-6);
}

TEST_CASE("attention is invariant to joint key/value permutation") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        Mat q = random_mat(5, 8, rng), k = random_mat(9, 8, rng), v = random_mat(9, 8, rng);
        std::vector<Index> perm(9);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Mat kp(9, 8), vp(9, 8);
        for (Index i = 0; i < 9; ++i) {
            kp.row(i) = k.row(perm[i]);
            vp.row(i) = v.row(perm[i]);
        }
        Mat a, b;
        kernels::attention(q, k, v, 2, a);
        kernels::attention(q, kp, vp, 2, b);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("layer_norm examples") {
    Tensor ones = Tensor::from_data({3}, {1, 1, 1});
    Tensor zeros3 = Tensor::zeros({3});
    Tensor out = layer_norm(mat_tensor({{1, 1, 1}}), ones, zeros3);
    for (double v : out.data()) CHECK(v == 0.0);

    Tensor out2 = layer_norm(mat_tensor({{1, -1}}), Tensor::from_data({2}, {1, 1}), Tensor::zeros({2}));
    CHECK(std::abs(out2.data()[0] - 1.0) < 1e-4);
    CHECK(std::abs(out2.data()[1] + 1.0) < 1e-4);

    // [0,2,4], gain 2, bias 1 against a scalar mean/variance evaluation.
    Tensor out3 = layer_norm(mat_tensor({{0, 2, 4}}), Tensor::from_data({3}, {2, 2, 2}),
                             Tensor::from_data({3}, {1, 1, 1}));
    const double x[3] = {0, 2, 4};
    const double mu = (x[0] + x[1] + x[2]) / 3.0;
    const double var = ((x[0] - mu) * (x[0] - mu) + (x[1] - mu) * (x[1] - mu) + (x[2] - mu) * (x[2] - mu)) / 3.0;
    for (int i = 0; i < 3; ++i) CHECK(std::abs(out3.data()[i] - (2.0 * (x[i] - mu) / std::sqrt(var + 1e-5) + 1.0)) < 1e-14);

    Mat m = out3.to_matrix();
    Mat k = kernels::layer_norm_rows(Mat{{0.0, 2.0, 4.0}}, RowVec::Constant(3, 2.0), RowVec::Constant(3, 1.0));
    CHECK((m - k).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("feed_forward examples") {
    Rng rng(5);
    SUBCASE("zero weights give the final bias") {
        ParameterStore store;
        FeedForward ff = FeedForward::create(store, "ff", 3, 2, rng);
        for (auto& [n, t] : store) std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
        auto b2 = store.at("ff.fc2.b").mutable_data();
        b2[0] = 0.5; b2[1] = -1.0; b2[2] = 2.0;
        Tensor out = ff.forward(Tensor::from_matrix(random_mat(4, 3, rng)));
        for (Index i = 0; i < 4; ++i) {
            CHECK(out.matrix()(i, 0) == 0.5);
            CHECK(out.matrix()(i, 1) == -1.0);
            CHECK(out.matrix()(i, 2) == 2.0);
        }
    }
    SUBCASE("identity-like first layer with zero second layer") {
        ParameterStore store;
        FeedForward ff = FeedForward::create(store, "ff", 2, 1, rng, Init::Zeros);
        auto w1 = store.at("ff.fc1.w").mutable_data();
        w1[0] = 1; w1[1] = 0; w1[2] = 0; w1[3] = 1;
        auto b2 = store.at("ff.fc2.b").mutable_data();
        b2[0] = 3; b2[1] = 4;
        Tensor out = ff.forward(Tensor::from_matrix(random_mat(3, 2, rng)));
        for (Index i = 0; i < 3; ++i) {
            CHECK(out.matrix()(i, 0) == 3);
            CHECK(out.matrix()(i, 1) == 4);
        }
    }
    SUBCASE("scalar-by-scalar oracle, d=2") {
        ParameterStore store;
        FeedForward ff = FeedForward::create(store, "ff", 2, 2, rng);
        store.randomize(rng, 0.3);
        Mat x = random_mat(3, 2, rng);
        Tensor out = ff.forward(Tensor::from_matrix(x));
        Mat inferred = ff.infer(x);
        ConstMatMap w1 = store.at("ff.fc1.w").matrix(), w2 = store.at("ff.fc2.w").matrix();
        auto b1 = store.at("ff.fc1.b").data(), b2 = store.at("ff.fc2.b").data();
        for (Index i = 0; i < 3; ++i) {
            double hidden[4];
            for (int j = 0; j < 4; ++j) hidden[j] = gelu_oracle(x(i, 0) * w1(0, j) + x(i, 1) * w1(1, j) + b1[j]);
            for (int c = 0; c < 2; ++c) {
                double y = b2[c];
                for (int j = 0; j < 4; ++j) y += hidden[j] * w2(j, c);
                CHECK(std::abs(out.matrix()(i, c) - y) < 1e-14);
                CHECK(std::abs(inferred(i, c) - y) < 1e-14);
            }
        }
    }
}

TEST_CASE("finite_diff_check examples") {
    Rng rng(9);
    SUBCASE("quadratic is exact") {
        ParameterStore store;
        Tensor p = store.add("p", {2, 3}, Init::Normal, rng, 1.0);
        auto report = finite_diff_check([&] { return sum(square(p)); }, store, 1e-3, 1e-9);
        CHECK(report.passed);
        CHECK(report.max_rel_error < 1e-9);
        CHECK(report.checked_entries == 6);
    }
    SUBCASE("one attention layer, d=4, two tokens") {
        ParameterStore store;
        auto attn = AttentionProjections::create(store, "attn", 4, 2, rng);
        store.randomize(rng, 0.5);
        Tensor x = Tensor::from_matrix(random_mat(2, 4, rng));
        auto report = finite_diff_check([&] { return sum(square(attn.forward(x, x))); }, store, 1e-4, 1e-5);
        CHECK_MESSAGE(report.passed, report.worst_parameter, " ", report.max_rel_error);
    }
    SUBCASE("frozen parameters are skipped") {
        ParameterStore store;
        Tensor a = store.add("a", {3}, Init::Normal, rng, 1.0);
        Tensor b = store.add("b", {3}, Init::Normal, rng, 1.0);
        b.set_requires_grad(false);
        auto report = finite_diff_check([&] { return sum(mul(a, b)); }, store, 1e-4, 1e-8);
        REQUIRE(report.skipped.size() == 1);
        CHECK(report.skipped[0] == "b");
        CHECK(report.checked_entries == 3);
    }
    SUBCASE("non-finite loss") {
        ParameterStore store;
        Tensor a = store.add("a", {1}, Init::Zeros, rng);
        CHECK_THROWS_AS(finite_diff_check([&] { return scale(a, std::numeric_limits<double>::infinity()); }, store,
                                          1e-4, 1e-5),
                        NumericError);
    }
}

TEST_CASE("every primitive passes finite differences") {
    Rng rng(21);
    ParameterStore store;
    Tensor a = store.add("a", {3, 4}, Init::Normal, rng, 1.0);
    Tensor b = store.add("b", {4, 2}, Init::Normal, rng, 1.0);
    Tensor c = store.add("c", {3, 4}, Init::Normal, rng, 1.0);
    Tensor bias = store.add("bias", {4}, Init::Normal, rng, 1.0);
    Tensor g = store.add("g", {4}, Init::Normal, rng, 1.0);
    auto loss = [&] {
        Tensor ln = layer_norm(add_row(a, bias), g, bias);
        Tensor sm = softmax_rows(scale(mul(ln, c), 0.7));
        Tensor mixed = concat_rows({slice_rows(sm, 1, 2), gelu(sub(a, c))});
        Tensor cols = concat_cols({slice_cols(mixed, 0, 2), matmul(mixed, b)});
        Tensor t = transpose(cols);
        return add(mean(square(t)), mean(abs(matmul(a, b))));
    };
    auto report = finite_diff_check(loss, store, 1e-5, 1e-6);
    CHECK_MESSAGE(report.passed, report.worst_parameter, "[", report.worst_index, "] ", report.max_rel_error);
}

TEST_CASE("transformer layer routes agree") {
    Rng rng(4);
    ParameterStore store;
    auto layer = TransformerLayer::create(store, "t", 8, 2, 4, rng);
    store.randomize(rng, 0.2);
    Mat z = random_mat(6, 8, rng);
    Tensor taped = layer.forward(Tensor::from_matrix(z, true));
    Mat inferred = z;
    layer.infer(inferred);
    CHECK((taped.to_matrix() - inferred).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("matmul matches the naive product") {
    Rng rng(2);
    Mat a = random_mat(7, 5, rng), b = random_mat(5, 3, rng);
    Tensor t = matmul(Tensor::from_matrix(a), Tensor::from_matrix(b));
    CHECK((t.to_matrix() - kernels::matmul_reference(a, b)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("parameter store serialization") {
    Rng rng(1);
    ParameterStore store;
    store.add("layer.w", {3, 2}, Init::Normal, rng, 1.0);
    store.add("layer.b", {2}, Init::Ones, rng);
    CHECK_THROWS_AS(store.add("layer.b", {2}, Init::Ones, rng), ArgumentError);
    CHECK(store.all_finite());

    auto dir = std::filesystem::temp_directory_path() / "polydiff_params_test";
    std::filesystem::create_directories(dir);
    save_parameters(store, dir / "p.bin", dir / "p.manifest");
    CHECK(std::filesystem::file_size(dir / "p.bin") == 4u * 8u);

    ParameterStore loaded;
    Rng other(99);
    loaded.add("layer.w", {3, 2}, Init::Zeros, other);
    loaded.add("layer.b", {2}, Init::Zeros, other);
    load_parameters(loaded, dir / "p.bin", dir / "p.manifest");
    for (Index i = 0; i < 6; ++i)
        CHECK(loaded.at("layer.w").data()[i] == static_cast<double>(static_cast<float>(store.at("layer.w").data()[i])));
    CHECK(loaded.at("layer.b").data()[1] == 1.0);

    ParameterStore wrong;
    wrong.add("layer.w", {2, 3}, Init::Zeros, other);
    wrong.add("layer.b", {2}, Init::Zeros, other);
    CHECK_THROWS_AS(load_parameters(wrong, dir / "p.bin", dir / "p.manifest"), DimensionError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("no-grad guard suppresses recording") {
    Tensor a = Tensor::from_data({2}, {1, 2}, true);
    {
        NoGradGuard guard;
        CHECK_FALSE(square(a).requires_grad());
    }
    CHECK(square(a).requires_grad());
}
