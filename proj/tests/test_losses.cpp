#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "viewgrid/losses.hpp"
#include "viewgrid/ops.hpp"
#include "viewgrid/rng.hpp"

using namespace viewgrid;

namespace {

// Cameras at identity pose (R = I, s = 1) differing only in x_0, so
// ||K1 - K2||_F is exactly the x_0 difference.
std::vector<LearnedCamera> cameras_dx(double dx) {
    std::vector<LearnedCamera> cams;
    cams.emplace_back("camera0");
    cams.emplace_back("camera1");
    cams[1].x_0.value[0] = dx;
    return cams;
}

}  // namespace

TEST_CASE("three_d_loss") {
    Tape t;
    Tensor a({2, 3}, std::vector<double>{1, -2, 0.5, 3, 0, -1});
    SUBCASE("identical tensors give zero") {
        CHECK(losses::three_d_loss(t.constant(a), t.constant(a)).item() == 0.0);
    }
    SUBCASE("one entry differing by 3 gives 3") {
        Tensor b = a;
        b[4] += 3.0;
        CHECK(losses::three_d_loss(t.constant(a), t.constant(b)).item() ==
              doctest::Approx(3.0).epsilon(1e-15));
        // symmetry
        CHECK(losses::three_d_loss(t.constant(b), t.constant(a)).item() ==
              doctest::Approx(3.0).epsilon(1e-15));
    }
    SUBCASE("doubling the difference doubles the loss") {
        Rng rng(11);
        Tensor d({2, 3});
        for (std::size_t i = 0; i < 6; ++i) d[i] = rng.uniform(-1, 1);
        Tensor b = a, c = a;
        b.axpy_inplace(1.0, d);
        c.axpy_inplace(2.0, d);
        double l1 = losses::three_d_loss(t.constant(a), t.constant(b)).item();
        double l2 = losses::three_d_loss(t.constant(a), t.constant(c)).item();
        CHECK(l2 == doctest::Approx(2.0 * l1).epsilon(1e-12));
        CHECK(l1 > 0.0);
    }
    SUBCASE("shape mismatch is rejected") {
        Tensor b({3, 2}, 0.0);
        Var va = t.constant(a), vb = t.constant(b);
        CHECK_THROWS(losses::three_d_loss(va, vb));
    }
}

TEST_CASE("cam_reg hinge") {
    SUBCASE("identical cameras at margin 1 cost 1") {
        auto cams = cameras_dx(0.0);
        Tape t;
        CHECK(losses::cam_reg(t, cams[0], cams[1], 1.0).item() ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("distance beyond the margin costs nothing") {
        auto cams = cameras_dx(2.0);
        Tape t;
        CHECK(losses::cam_reg(t, cams[0], cams[1], 1.0).item() == 0.0);
    }
    SUBCASE("hinge arithmetic inside the margin") {
        auto cams = cameras_dx(0.4);
        Tape t;
        CHECK(losses::cam_reg(t, cams[0], cams[1], 1.0).item() ==
              doctest::Approx(0.6).epsilon(1e-12));
    }
}

TEST_CASE("cross_entropy") {
    SUBCASE("uniform logits over 4 classes") {
        Tape t;
        Var z = t.constant(Tensor({4}, 0.7));  // any constant vector is uniform
        CHECK(losses::cross_entropy(z, 2).item() ==
              doctest::Approx(std::log(4.0)).epsilon(1e-10));
    }
    SUBCASE("uniform logits over 5 classes hit ln 5") {
        Tape t;
        Var z = t.constant(Tensor({5}, 0.0));
        CHECK(losses::cross_entropy(z, 0).item() ==
              doctest::Approx(std::log(5.0)).epsilon(1e-10));
    }
    SUBCASE("a huge true-class margin drives the loss to zero") {
        Tensor z({3}, 0.0);
        z[1] = 60.0;
        Tape t;
        CHECK(losses::cross_entropy(t.constant(z), 1).item() < 1e-20);
    }
    SUBCASE("gradient is softmax minus one-hot") {
        Parameter p("z", Tensor({5}));
        Rng rng(13);
        for (int i = 0; i < 5; ++i) p.value[i] = rng.normal(0.0, 1.5);
        Tape t;
        t.backward(losses::cross_entropy(t.leaf(p), 3));

        double mx = p.value[0];
        for (int i = 1; i < 5; ++i) mx = std::max(mx, p.value[i]);
        double zsum = 0.0;
        for (int i = 0; i < 5; ++i) zsum += std::exp(p.value[i] - mx);
        for (int i = 0; i < 5; ++i) {
            double soft = std::exp(p.value[i] - mx) / zsum;
            double want = soft - (i == 3 ? 1.0 : 0.0);
            CHECK(p.grad[i] == doctest::Approx(want).epsilon(1e-12));
        }
    }
    SUBCASE("label out of range") {
        Tape t;
        Var z = t.constant(Tensor({3}, 0.0));
        CHECK_THROWS(losses::cross_entropy(z, 3));
    }
}

TEST_CASE("total_loss composition") {
    Rng rng(17);
    auto logits3 = [&](Tape& t) {
        std::vector<Var> ls;
        for (int i = 0; i < 3; ++i) {
            Tensor z({5});
            for (int k = 0; k < 5; ++k) z[k] = rng.normal(0.0, 1.0);
            ls.push_back(t.constant(z));
        }
        return ls;
    };
    std::vector<std::size_t> labels{0, 0, 1};

    SUBCASE("lambda1 = lambda2 = 0 reduces to mean cross-entropy") {
        Tape t;
        auto ls = logits3(t);
        double want = 0.0;
        for (int i = 0; i < 3; ++i)
            want += losses::cross_entropy(ls[i], labels[i]).item();
        want /= 3.0;
        LossWeights w{0.0, 0.0, 1.0};
        auto br = losses::total_loss(t, ls, labels, {{0, 1}}, {}, nullptr, w);
        CHECK(br.total.item() == doctest::Approx(want).epsilon(1e-12));
        CHECK(br.ce.item() == doctest::Approx(want).epsilon(1e-12));
    }

    SUBCASE("no same-label pairs leaves the 3d term at zero") {
        Tape t;
        auto ls = logits3(t);
        std::vector<Var> reps{t.constant(Tensor({2}, 1.0)), t.constant(Tensor({2}, 2.0)),
                              t.constant(Tensor({2}, 3.0))};
        LossWeights w{1.0, 0.0, 1.0};
        auto br = losses::total_loss(t, ls, labels, {}, reps, nullptr, w);
        CHECK(br.total.item() == doctest::Approx(br.ce.item()).epsilon(1e-12));
    }

    SUBCASE("identical reps, identical cameras, alpha=1: total = CE + 0 + 1") {
        Tape t;
        auto ls = logits3(t);
        Tensor r({4}, std::vector<double>{0.1, -0.2, 0.3, 0.4});
        std::vector<Var> reps{t.constant(r), t.constant(r), t.constant(r)};
        auto cams = cameras_dx(0.0);  // N=2 identical cameras -> one pair, hinge 1
        LossWeights w{1.0, 1.0, 1.0};
        auto br = losses::total_loss(t, ls, labels, {{0, 1}}, reps, &cams, w);
        CHECK(br.total.item() == doctest::Approx(br.ce.item() + 0.0 + 1.0).epsilon(1e-12));
        CHECK(br.three_d.item() == 0.0);
        CHECK(br.cam.item() == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("linear in lambda1 and lambda2") {
        auto eval = [&](double l1, double l2) {
            Rng local(17);  // same logits each call
            Tape t;
            std::vector<Var> ls;
            for (int i = 0; i < 3; ++i) {
                Tensor z({5});
                for (int k = 0; k < 5; ++k) z[k] = local.normal(0.0, 1.0);
                ls.push_back(t.constant(z));
            }
            std::vector<Var> reps{t.constant(Tensor({2}, 1.0)),
                                  t.constant(Tensor({2}, 1.5)),
                                  t.constant(Tensor({2}, 3.0))};
            auto cams = cameras_dx(0.25);
            LossWeights w{l1, l2, 1.0};
            return losses::total_loss(t, ls, labels, {{0, 1}}, reps, &cams, w).total.item();
        };
        double base = eval(0, 0);
        double d1 = eval(1, 0) - base;
        double d2 = eval(0, 1) - base;
        CHECK(eval(2, 0) - base == doctest::Approx(2.0 * d1).epsilon(1e-12));
        CHECK(eval(0, 3) - base == doctest::Approx(3.0 * d2).epsilon(1e-12));
        CHECK(eval(2, 3) - base == doctest::Approx(2.0 * d1 + 3.0 * d2).epsilon(1e-12));
        CHECK(d1 > 0.0);
        CHECK(d2 > 0.0);
    }
}
