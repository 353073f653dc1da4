#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <memory>
#include <stdexcept>

#include "doctest.h"
#include "viewgrid/gradcheck.hpp"
#include "viewgrid/ops.hpp"
#include "viewgrid/optim.hpp"
#include "viewgrid/rng.hpp"
#include "viewgrid/tape.hpp"
#include "viewgrid/tensor.hpp"

using namespace viewgrid;
namespace o = ops;

TEST_CASE("tensor basics") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.rank() == 2);
    CHECK(t.size() == 6);
    CHECK(t[4] == 1.5);
    CHECK(t.all_finite());

    Tensor s = Tensor::scalar(4.0);
    CHECK(s.rank() == 0);
    CHECK(s.size() == 1);
    CHECK(s.item() == 4.0);

    t.axpy_inplace(2.0, Tensor({2, 3}, 0.25));
    CHECK(t[0] == 2.0);
}

TEST_CASE("backward: linear and quadratic") {
    SUBCASE("sum(p) -> grad all ones") {
        Parameter p("p", Tensor({3}, 0.0));
        p.value[0] = 5.0;
        Tape t;
        t.backward(o::sum(t.leaf(p)));
        CHECK(p.grad[0] == 1.0);
        CHECK(p.grad[1] == 1.0);
        CHECK(p.grad[2] == 1.0);
    }
    SUBCASE("sum(p*p) at [1,2,3] -> [2,4,6]") {
        Parameter p("p", Tensor({3}, std::vector<double>{1, 2, 3}));
        Tape t;
        Var v = t.leaf(p);
        t.backward(o::sum(o::mul(v, v)));
        CHECK(p.grad[0] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(p.grad[1] == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(p.grad[2] == doctest::Approx(6.0).epsilon(1e-12));
    }
}

TEST_CASE("backward: errors") {
    Parameter p("p", Tensor({2}, 1.0));
    Tape t;
    Var v = t.leaf(p);
    CHECK_THROWS_AS(t.backward(v), std::invalid_argument);  // not scalar

    Tape other;
    Var s = o::sum(v);
    CHECK_THROWS_AS(other.backward(s), std::invalid_argument);  // wrong tape
}

TEST_CASE("backward is additive over loss terms") {
    auto grads_of = [](double w1, double w2) {
        Parameter p("p", Tensor({4}, std::vector<double>{0.3, -0.7, 1.1, 0.05}));
        Tape t;
        Var v = t.leaf(p);
        Var l1 = o::sum(o::tanh(v));
        Var l2 = o::mean(o::square(v));
        t.backward(o::add(o::scale(l1, w1), o::scale(l2, w2)));
        return p.grad;
    };
    Tensor combined = grads_of(1.0, 1.0);
    Tensor only1 = grads_of(1.0, 0.0);
    Tensor only2 = grads_of(0.0, 1.0);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(combined[i] == doctest::Approx(only1[i] + only2[i]).epsilon(1e-12));
}

TEST_CASE("grad accumulates additively when a parameter is reused") {
    Parameter p("p", Tensor({}, 2.0));
    Tape t;
    Var a = t.leaf(p);
    Var b = t.leaf(p);  // second use of the same parameter
    t.backward(o::add(o::scale(a, 3.0), o::scale(b, 4.0)));
    CHECK(p.grad.item() == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("sgd_step") {
    SUBCASE("lr=0 leaves values unchanged") {
        Parameter p("p", Tensor({2}, 1.0));
        p.grad.fill(0.5);
        std::vector<Parameter*> ps{&p};
        sgd_step(ps, 0.0, 0.9);
        CHECK(p.value[0] == 1.0);
        CHECK(p.grad[0] == 0.0);  // grads zeroed by the step
    }
    SUBCASE("momentum=0 single step") {
        Parameter p("p", Tensor({}, 1.0));
        p.grad.fill(0.5);
        std::vector<Parameter*> ps{&p};
        sgd_step(ps, 0.01, 0.0);
        CHECK(p.value.item() == doctest::Approx(0.995).epsilon(1e-15));
    }
    SUBCASE("momentum recurrence over two steps") {
        Parameter p("p", Tensor({}, 0.0));
        std::vector<Parameter*> ps{&p};
        p.grad.fill(1.0);
        sgd_step(ps, 0.1, 0.9);
        CHECK(p.value.item() == doctest::Approx(-0.1).epsilon(1e-15));
        p.grad.fill(1.0);
        sgd_step(ps, 0.1, 0.9);
        CHECK(p.velocity.item() == doctest::Approx(1.9).epsilon(1e-15));
        CHECK(p.value.item() == doctest::Approx(-0.29).epsilon(1e-15));
    }
    SUBCASE("negative lr rejected") {
        Parameter p("p", Tensor({}, 0.0));
        std::vector<Parameter*> ps{&p};
        CHECK_THROWS_AS(sgd_step(ps, -0.01, 0.0), std::invalid_argument);
    }
    SUBCASE("plain sgd descends a convex quadratic") {
        Parameter p("p", Tensor({3}, std::vector<double>{1.0, -2.0, 0.5}));
        std::vector<Parameter*> ps{&p};
        auto loss_val = [&] {
            Tape t;
            Var v = t.leaf(p);
            Var l = o::sum(o::square(v));
            double val = l.item();
            t.backward(l);
            return val;
        };
        double before = loss_val();
        sgd_step(ps, 1e-3, 0.0);
        zero_grad(ps);
        double after = loss_val();
        CHECK(after < before);
    }
}

TEST_CASE("grad_check basics") {
    SUBCASE("tanh at 0 has derivative 1") {
        auto p = std::make_shared<Parameter>("x", Tensor({}, 0.0));
        GradCheckResult r = grad_check("tanh0", {p.get()}, [p](Tape& t) {
            return o::tanh(t.leaf(*p));
        });
        CHECK(r.pass);
        CHECK(r.max_rel_err < 1e-10);
    }
    SUBCASE("x^2 at 3: analytic 6") {
        Parameter p("x", Tensor({}, 3.0));
        Tape t;
        Var v = t.leaf(p);
        t.backward(o::square(v));
        CHECK(p.grad.item() == doctest::Approx(6.0).epsilon(1e-12));
    }
    SUBCASE("cross entropy at random logits passes tol 1e-4") {
        auto p = std::make_shared<Parameter>("z", Tensor({5}));
        Rng rng(31);
        for (std::size_t i = 0; i < 5; ++i) p->value[i] = rng.normal(0.0, 2.0);
        GradCheckResult r = grad_check("ce", {p.get()}, [p](Tape& t) {
            return o::cross_entropy(t.leaf(*p), 3);
        });
        CHECK(r.pass);
    }
    SUBCASE("non-deterministic function is detected") {
        auto p = std::make_shared<Parameter>("x", Tensor({}, 1.0));
        auto counter = std::make_shared<int>(0);
        GradCheckResult r = grad_check("nondet", {p.get()}, [p, counter](Tape& t) {
            ++*counter;
            return o::scale(t.leaf(*p), 1.0 + 1e-9 * *counter);
        });
        CHECK_FALSE(r.pass);
        CHECK(!r.error.empty());
    }
    SUBCASE("corrupted backward rule is flagged") {
        auto p = std::make_shared<Parameter>("x", Tensor({}, 0.7));
        // Forward computes x^2 but claims d/dx = 3x.
        GradCheckResult r = grad_check("broken", {p.get()}, [p](Tape& t) {
            Var v = t.leaf(*p);
            double x = v.value().item();
            std::size_t pid = v.id;
            return t.emit(Tensor::scalar(x * x), {pid}, [pid](Tape& tp, std::size_t id) {
                double g = tp.grad(id).item();
                tp.grad(pid).data()[0] += 3.0 * tp.value(pid).item() * g;
            });
        });
        CHECK_FALSE(r.pass);
        CHECK(r.max_rel_err > 1e-2);
    }
}

TEST_CASE("builtin gradcheck registry covers the op set") {
    register_builtin_gradchecks();
    auto results = run_gradchecks();
    CHECK(results.size() >= 10);
    for (const auto& r : results) {
        INFO(r.name, ": ", r.max_rel_err, " ", r.error);
        CHECK(r.pass);
    }
}

TEST_CASE("rng determinism and stream separation") {
    Rng a(123), b(123);
    for (int i = 0; i < 10; ++i) CHECK(a.uniform() == b.uniform());

    Rng s0(Rng::derive(9, 0)), s1(Rng::derive(9, 1));
    bool differs = false;
    for (int i = 0; i < 8; ++i) differs |= s0.uniform() != s1.uniform();
    CHECK(differs);

    Rng n(7);
    double x = n.normal(0.0, 1.0);
    CHECK(std::isfinite(x));

    std::vector<int> v{1, 2, 3, 4, 5, 6};
    std::vector<int> w = v;
    Rng sh1(42), sh2(42);
    sh1.shuffle(v);
    sh2.shuffle(w);
    CHECK(v == w);
}

TEST_CASE("ops keep finite values finite") {
    Rng rng(5);
    Parameter p("p", Tensor({4, 4}));
    for (std::size_t i = 0; i < 16; ++i) p.value[i] = rng.uniform(-3.0, 3.0);
    Tape t;
    Var v = t.leaf(p);
    Var out = o::add(o::tanh(v), o::mul(o::relu(v), o::exp(o::scale(v, -0.5))));
    CHECK(out.value().all_finite());
    t.backward(o::sum(out));
    CHECK(p.grad.all_finite());
}
