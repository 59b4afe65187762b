#include <doctest.h>

#include <cmath>
#include <vector>

#include "fairsel/causal.hpp"
#include "fairsel/distribution.hpp"
#include "fairsel/errors.hpp"
#include "fairsel/validation.hpp"
#include "helpers.hpp"

using namespace fairsel;
using testutil::feat;
using testutil::h2;
using testutil::label;
using testutil::make_joint;
using testutil::prot;

namespace {

// P(a, x1, x2, y) with Y a noisy function of X1: the canonical schema used
// throughout, A independent of everything.
JointDistribution bsc_label_joint(double eps) {
  std::vector<double> p;
  p.reserve(16);
  for (int a = 0; a < 2; ++a)
    for (int x1 = 0; x1 < 2; ++x1)
      for (int x2 = 0; x2 < 2; ++x2)
        for (int y = 0; y < 2; ++y) {
          const double flip = (y == x1) ? 1.0 - eps : eps;
          p.push_back(0.5 * 0.5 * 0.5 * flip);
        }
  return make_joint({prot("A"), feat("X1"), feat("X2"), label("Y")}, p);
}

}  // namespace

TEST_SUITE("validation") {

TEST_CASE("plug-in decisions equal the per-configuration argmax") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const JointDistribution d =
        testutil::random_joint({prot("A"), feat("X1", 3), feat("X2"), label("Y", 3)}, seed);
    const PluginClassifier clf = bayes_classifier(d, SubsetKey(0b11));
    REQUIRE(clf.feature_names == std::vector<std::string>{"X1", "X2"});
    REQUIRE(clf.feature_cards == std::vector<int>{3, 2});
    REQUIRE(clf.configurations() == 6);

    // Independent argmax over P(x1, x2, y) cells, row-major (x1, x2).
    const JointDistribution m = marginalize(d, {"X1", "X2", "Y"});
    for (int x1 = 0; x1 < 3; ++x1)
      for (int x2 = 0; x2 < 2; ++x2) {
        int best = 0;
        double best_p = -1.0;
        for (int y = 0; y < 3; ++y) {
          const double p = m.prob(std::vector<int>{x1, x2, y});
          if (p > best_p) {
            best_p = p;
            best = y;
          }
        }
        CHECK(clf.decisions[static_cast<std::size_t>(x1 * 2 + x2)] == best);
      }
  }
}

TEST_CASE("plug-in ties go to the lowest label and dead cells to the majority") {
  // P(y | x=0) uniform (tie), P(x=1) = 0 (dead), majority label is 1 thanks
  // to the x=0 column leaning on y=1 overall? Keep it explicit instead:
  // cells (x, y): (0,0)=0.3, (0,1)=0.3, (1,0)=0, (1,1)=0, (2,0)=0.1, (2,1)=0.3.
  const JointDistribution d = make_joint({prot("A"), feat("X", 3), label("Y")},
                                         {0.15, 0.15, 0.0, 0.0, 0.05, 0.15,
                                          0.15, 0.15, 0.0, 0.0, 0.05, 0.15});
  const PluginClassifier clf = bayes_classifier(d, SubsetKey(0b1));
  CHECK(clf.decisions[0] == 0);  // tie 0.3 vs 0.3 resolves down
  CHECK(clf.decisions[2] == 1);  // 0.1 vs 0.3
  CHECK(clf.majority == 1);      // P(Y=1) = 0.6
  CHECK(clf.decisions[1] == 1);  // zero-mass configuration falls back

  CHECK_THROWS_AS(bayes_classifier(d, SubsetKey(0)), ArgumentError);
  CHECK_THROWS_AS(bayes_classifier(d, SubsetKey(0b10)), ArgumentError);
}

TEST_CASE("classifier metrics on exact constructions") {
  const JointDistribution clean = bsc_label_joint(0.0);
  const PluginClassifier copy = bayes_classifier(clean, SubsetKey(0b1));
  const ClassifierMetrics perfect = classifier_error(copy, clean);
  CHECK(perfect.error_01 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(perfect.cross_entropy == doctest::Approx(0.0).epsilon(1e-9));

  const JointDistribution noisy = bsc_label_joint(0.1);
  const PluginClassifier clf = bayes_classifier(noisy, SubsetKey(0b1));
  const ClassifierMetrics metrics = classifier_error(clf, noisy);
  CHECK(metrics.error_01 == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(metrics.cross_entropy == doctest::Approx(h2(0.1)).epsilon(1e-9));

  // Features ignored by the decision rule do not change the metrics.
  const PluginClassifier both = bayes_classifier(noisy, SubsetKey(0b11));
  const ClassifierMetrics same = classifier_error(both, noisy);
  CHECK(same.error_01 == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("bias divergence is zero for group-blind decisions") {
  const PluginClassifier clf = bayes_classifier(bsc_label_joint(0.2), SubsetKey(0b1));
  CHECK(bias_kl(clf, bsc_label_joint(0.2)) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("bias divergence matches the two-group hand formula") {
  // A -> X1 (BSC eps_ax), Y = X1 (exact), X2 independent noise. The plug-in
  // on {X1} decides Y = X1, so P(decision=1 | A=a) = P(X1=1 | A=a).
  const double eps_ax = 0.2;
  std::vector<double> p;
  for (int a = 0; a < 2; ++a)
    for (int x1 = 0; x1 < 2; ++x1)
      for (int x2 = 0; x2 < 2; ++x2)
        for (int y = 0; y < 2; ++y) {
          const double px1 = (x1 == a) ? 1.0 - eps_ax : eps_ax;
          const double py = (y == x1) ? 0.98 : 0.02;
          p.push_back(0.5 * px1 * 0.5 * py);
        }
  const JointDistribution d = make_joint({prot("A"), feat("X1"), feat("X2"), label("Y")}, p);
  const PluginClassifier clf = bayes_classifier(d, SubsetKey(0b1));
  const double q0 = eps_ax;        // P(decision=1 | A=0)
  const double q1 = 1.0 - eps_ax;  // P(decision=1 | A=1)
  const double expected = (1.0 - q0) * std::log2((1.0 - q0) / (1.0 - q1)) +
                          q0 * std::log2(q0 / q1);
  CHECK(bias_kl(clf, d) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("bias divergence rejects unsupported group structure") {
  const JointDistribution wide =
      testutil::random_joint({prot("A", 3), feat("X1"), label("Y")}, 4);
  const PluginClassifier clf = bayes_classifier(wide, SubsetKey(0b1));
  CHECK_THROWS_AS(bias_kl(clf, wide), UnsupportedMetricError);

  // One group carries no mass at all.
  std::vector<double> p = {0.2, 0.2, 0.3, 0.3, 0.0, 0.0, 0.0, 0.0};
  const JointDistribution dead =
      make_joint({prot("A"), feat("X1"), label("Y")}, p);
  const PluginClassifier clf2 = bayes_classifier(dead, SubsetKey(0b1));
  CHECK_THROWS_AS(bias_kl(clf2, dead), DegenerateEvidenceError);
}

TEST_CASE("group-independent features give group-independent decisions") {
  // X independent of A: the pushforward P(decision, A) factorizes, so the
  // demographic-parity mutual information I(decision; A) vanishes.
  const JointDistribution d = bsc_label_joint(0.15);
  const PluginClassifier clf = bayes_classifier(d, SubsetKey(0b11));

  // Build P(A, decision) by pushing each (a, x1, x2) cell through the rule.
  Eigen::VectorXd push = Eigen::VectorXd::Zero(4);
  const JointDistribution m = marginalize(d, {"A", "X1", "X2"});
  for (int a = 0; a < 2; ++a)
    for (int x1 = 0; x1 < 2; ++x1)
      for (int x2 = 0; x2 < 2; ++x2) {
        const int dec = clf.decisions[static_cast<std::size_t>(x1 * 2 + x2)];
        push[a * 2 + dec] += m.prob(std::vector<int>{a, x1, x2});
      }
  const JointDistribution pushforward =
      make_joint({prot("A"), label("Yhat")},
                 {push[0], push[1], push[2], push[3]});
  CHECK(mutual_info(pushforward, {"A"}, {"Yhat"}) < 1e-9);
}

TEST_CASE("label-mediated group signal leaves no equalized-odds residual") {
  // P(y) P(x | y) P(a | y): X and A are dependent only through Y, so
  // I(decision; A | Y) = 0 while I(decision; A) > 0.
  const double py1 = 0.4, px_y1 = 0.8, px_y0 = 0.3, pa_y1 = 0.7, pa_y0 = 0.2;
  std::vector<double> p;
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) {
        const double fy = (y == 1) ? py1 : 1.0 - py1;
        const double fx = (y == 1) ? (x == 1 ? px_y1 : 1.0 - px_y1)
                                   : (x == 1 ? px_y0 : 1.0 - px_y0);
        const double fa = (y == 1) ? (a == 1 ? pa_y1 : 1.0 - pa_y1)
                                   : (a == 1 ? pa_y0 : 1.0 - pa_y0);
        p.push_back(fy * fx * fa);
      }
  const JointDistribution d = make_joint({prot("A"), feat("X"), label("Y")}, p);
  const PluginClassifier clf = bayes_classifier(d, SubsetKey(0b1));

  // Pushforward P(a, yhat, y) built from the joint and the decision table.
  Eigen::VectorXd push = Eigen::VectorXd::Zero(8);
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) {
        const int dec = clf.decisions[static_cast<std::size_t>(x)];
        push[a * 4 + dec * 2 + y] += d.prob(std::vector<int>{a, x, y});
      }
  std::vector<double> pv(push.data(), push.data() + 8);
  const JointDistribution joint =
      make_joint({prot("A"), feat("Yhat"), label("Y")}, pv);
  CHECK(cond_mutual_info(joint, {"Yhat"}, {"A"}, {"Y"}) < 1e-9);
  CHECK(mutual_info(joint, {"Yhat"}, {"A"}) > 1e-3);
}

TEST_CASE("removal sweep finds the mediating and the predictive feature") {
  // All of A's signal flows through X1: removing X1 minimizes the bias term.
  const JointDistribution star = exact_joint(make_fixture(FixtureKind::single_child_a, 3, 2));
  const SweepReport bias_sweep = removal_sweep(star);
  REQUIRE(bias_sweep.removed.size() == 3);
  CHECK(bias_sweep.baseline.removed == -1);
  int argmin = 0;
  for (int i = 1; i < 3; ++i)
    if (bias_sweep.removed[static_cast<std::size_t>(i)].bias_kl <
        bias_sweep.removed[static_cast<std::size_t>(argmin)].bias_kl)
      argmin = i;
  CHECK(bias_sweep.removed[0].removed == 0);
  CHECK(argmin == 0);

  // Y reads only Xn: removing Xn costs the most accuracy.
  const JointDistribution chain = exact_joint(make_fixture(FixtureKind::single_parent_y, 3, 2));
  const SweepReport err_sweep = removal_sweep(chain);
  int argmax = 0;
  for (int i = 1; i < 3; ++i)
    if (err_sweep.removed[static_cast<std::size_t>(i)].error_01 >
        err_sweep.removed[static_cast<std::size_t>(argmax)].error_01)
      argmax = i;
  CHECK(argmax == 2);
  for (const auto& entry : err_sweep.removed)
    CHECK(entry.error_01 >= err_sweep.baseline.error_01 - 1e-12);
}

TEST_CASE("removal sweep is deterministic and guards its input") {
  const JointDistribution d = exact_joint(synthetic_standin(3));
  const SweepReport a = removal_sweep(d);
  const SweepReport b = removal_sweep(d);
  CHECK(a.baseline.error_01 == b.baseline.error_01);
  CHECK(a.baseline.bias_kl == b.baseline.bias_kl);
  for (std::size_t i = 0; i < a.removed.size(); ++i) {
    CHECK(a.removed[i].error_01 == b.removed[i].error_01);
    CHECK(a.removed[i].cross_entropy == b.removed[i].cross_entropy);
    CHECK(a.removed[i].bias_kl == b.removed[i].bias_kl);
  }

  const JointDistribution tiny =
      testutil::random_joint({prot("A"), feat("X1"), label("Y")}, 1);
  CHECK_THROWS_AS(removal_sweep(tiny), ArgumentError);
}

}  // TEST_SUITE
