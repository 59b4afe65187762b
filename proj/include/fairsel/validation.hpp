#pragma once

#include <string>
#include <vector>

#include "fairsel/distribution.hpp"

namespace fairsel {

// Plug-in Bayes decision table over a feature subset: decision(x_S) =
// argmax_y P(y | x_S), ties resolved to the lowest label, zero-probability
// configurations falling back to the global majority label. The predictive
// conditional P(y | x_S) is kept alongside the hard decisions.
struct PluginClassifier {
  std::vector<std::string> feature_names;  // ascending schema order at build time
  std::string label_name;
  std::vector<int> feature_cards;
  int label_card = 0;
  std::vector<int> decisions;       // per feature configuration, row-major
  std::vector<double> predictive;   // configuration-major, label-minor
  int majority = 0;

  std::int64_t configurations() const {
    return static_cast<std::int64_t>(decisions.size());
  }
};

// ArgumentError on an empty feature set; the key indexes the distribution's
// feature variables in schema order.
PluginClassifier bayes_classifier(const JointDistribution& dist, SubsetKey features);

struct ClassifierMetrics {
  double error_01 = 0.0;       // P(decision != Y)
  double cross_entropy = 0.0;  // E[-log2 predictive(Y | X_S)] in bits
};

// Both metrics under dist; the classifier's variables must exist in dist
// with the same cardinalities.
ClassifierMetrics classifier_error(const PluginClassifier& clf, const JointDistribution& dist);

// D_KL(P(decision | A=0) || P(decision | A=1)) in bits. Zero numerator cells
// contribute zero; zero denominator cells are stabilized to 1e-9. The
// distribution must carry exactly one protected variable, and it must be
// binary (UnsupportedMetricError otherwise: multi-group audits need a
// pairwise divergence matrix, which this metric deliberately is not).
double bias_kl(const PluginClassifier& clf, const JointDistribution& dist);

struct SweepEntry {
  int removed = -1;  // feature index, -1 for the all-features baseline
  double error_01 = 0.0;
  double cross_entropy = 0.0;
  double bias_kl = 0.0;
};

struct SweepReport {
  SweepEntry baseline;
  std::vector<SweepEntry> removed;  // one entry per feature, ascending index
};

// Bayes plug-in metrics with every feature, then with each feature removed
// in turn. ArgumentError with fewer than 2 features.
SweepReport removal_sweep(const JointDistribution& dist);

}  // namespace fairsel
