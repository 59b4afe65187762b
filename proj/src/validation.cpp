#include "fairsel/validation.hpp"

#include <algorithm>
#include <cmath>

#include "fairsel/errors.hpp"

namespace fairsel {

namespace {

constexpr double kLog2 = 0.6931471805599453094172321215;
constexpr double kDenominatorFloor = 1e-9;

double log2_of(double x) { return std::log(x) / kLog2; }

// Positions of the classifier's variables in an evaluation distribution,
// checked for matching cardinalities.
struct ResolvedAxes {
  std::vector<int> features;
  int label = -1;
};

ResolvedAxes resolve(const PluginClassifier& clf, const JointDistribution& dist) {
  const auto& schema = dist.schema();
  ResolvedAxes axes;
  for (std::size_t j = 0; j < clf.feature_names.size(); ++j) {
    const int a = schema.index_of(clf.feature_names[j]);
    if (schema.var(a).cardinality != clf.feature_cards[j])
      throw SchemaError("variable '" + clf.feature_names[j] +
                        "' changed cardinality since the classifier was built");
    axes.features.push_back(a);
  }
  axes.label = schema.index_of(clf.label_name);
  if (schema.var(axes.label).cardinality != clf.label_card)
    throw SchemaError("label '" + clf.label_name +
                      "' changed cardinality since the classifier was built");
  return axes;
}

std::int64_t config_of(const PluginClassifier& clf, const ResolvedAxes& axes,
                       std::span<const int> idx) {
  std::int64_t config = 0;
  for (std::size_t j = 0; j < axes.features.size(); ++j) {
    config = config * clf.feature_cards[j] +
             idx[static_cast<std::size_t>(axes.features[j])];
  }
  return config;
}

}  // namespace

PluginClassifier bayes_classifier(const JointDistribution& dist, SubsetKey features) {
  const auto feats = dist.schema().feature_indices();
  if (features.empty()) throw ArgumentError("classifier needs a non-empty feature set");
  if (!features.subset_of(SubsetKey::full(static_cast<int>(feats.size()))))
    throw ArgumentError("subset key selects features beyond the schema's feature count");

  const auto& schema = dist.schema();
  PluginClassifier clf;
  clf.label_name = schema.var(schema.label_index()).name;
  clf.label_card = schema.var(schema.label_index()).cardinality;
  std::int64_t configs = 1;
  for (int i : features.members()) {
    const auto& v = schema.var(feats[static_cast<std::size_t>(i)]);
    clf.feature_names.push_back(v.name);
    clf.feature_cards.push_back(v.cardinality);
    configs *= v.cardinality;
    if (configs > 50'000'000) throw SizeError("classifier decision table too large");
  }

  // Joint mass per (configuration, label), plus the label marginal.
  std::vector<double> mass(static_cast<std::size_t>(configs * clf.label_card), 0.0);
  std::vector<double> label_mass(static_cast<std::size_t>(clf.label_card), 0.0);
  ResolvedAxes axes = resolve(clf, dist);
  const auto cards = schema.cardinalities();
  std::vector<int> idx(static_cast<std::size_t>(schema.size()), 0);
  std::int64_t linear = 0;
  do {
    const double p = dist.probs()[linear++];
    if (p != 0.0) {
      const std::int64_t config = config_of(clf, axes, idx);
      const int y = idx[static_cast<std::size_t>(axes.label)];
      mass[static_cast<std::size_t>(config * clf.label_card + y)] += p;
      label_mass[static_cast<std::size_t>(y)] += p;
    }
  } while (next_cell(idx, cards));

  clf.majority = static_cast<int>(
      std::max_element(label_mass.begin(), label_mass.end()) - label_mass.begin());

  clf.decisions.resize(static_cast<std::size_t>(configs), clf.majority);
  clf.predictive.resize(static_cast<std::size_t>(configs * clf.label_card), 0.0);
  double total = 0.0;
  for (double v : label_mass) total += v;
  total = std::max(total, 1e-300);
  for (std::int64_t c = 0; c < configs; ++c) {
    double config_mass = 0.0;
    for (int y = 0; y < clf.label_card; ++y)
      config_mass += mass[static_cast<std::size_t>(c * clf.label_card + y)];
    if (config_mass > 0.0) {
      int best = 0;
      double best_p = mass[static_cast<std::size_t>(c * clf.label_card)];
      for (int y = 1; y < clf.label_card; ++y) {
        const double p = mass[static_cast<std::size_t>(c * clf.label_card + y)];
        if (p > best_p) {
          best_p = p;
          best = y;
        }
      }
      clf.decisions[static_cast<std::size_t>(c)] = best;
      for (int y = 0; y < clf.label_card; ++y)
        clf.predictive[static_cast<std::size_t>(c * clf.label_card + y)] =
            mass[static_cast<std::size_t>(c * clf.label_card + y)] / config_mass;
    } else {
      // Unseen configuration: fall back to the overall label distribution.
      for (int y = 0; y < clf.label_card; ++y)
        clf.predictive[static_cast<std::size_t>(c * clf.label_card + y)] =
            label_mass[static_cast<std::size_t>(y)] / total;
    }
  }
  return clf;
}

ClassifierMetrics classifier_error(const PluginClassifier& clf, const JointDistribution& dist) {
  const ResolvedAxes axes = resolve(clf, dist);
  const auto& schema = dist.schema();
  const auto cards = schema.cardinalities();

  detail::CompensatedSum wrong, ce;
  std::vector<int> idx(static_cast<std::size_t>(schema.size()), 0);
  std::int64_t linear = 0;
  do {
    const double p = dist.probs()[linear++];
    if (p == 0.0) continue;
    const std::int64_t config = config_of(clf, axes, idx);
    const int y = idx[static_cast<std::size_t>(axes.label)];
    if (clf.decisions[static_cast<std::size_t>(config)] != y) wrong.add(p);
    const double q = clf.predictive[static_cast<std::size_t>(config * clf.label_card + y)];
    ce.add(-p * log2_of(q));
  } while (next_cell(idx, cards));

  ClassifierMetrics metrics;
  metrics.error_01 = wrong.value();
  metrics.cross_entropy = ce.value();
  return metrics;
}

double bias_kl(const PluginClassifier& clf, const JointDistribution& dist) {
  const auto& schema = dist.schema();
  const auto prot = schema.protected_indices();
  if (prot.size() != 1)
    throw SchemaError("bias divergence needs exactly one protected variable");
  const int a_axis = prot.front();
  if (schema.var(a_axis).cardinality != 2)
    throw UnsupportedMetricError(
        "bias divergence is defined for a binary protected attribute; "
        "multi-group comparisons need a pairwise divergence matrix");

  const ResolvedAxes axes = resolve(clf, dist);
  const auto cards = schema.cardinalities();
  std::vector<double> mass(static_cast<std::size_t>(2 * clf.label_card), 0.0);
  double group_mass[2] = {0.0, 0.0};

  std::vector<int> idx(static_cast<std::size_t>(schema.size()), 0);
  std::int64_t linear = 0;
  do {
    const double p = dist.probs()[linear++];
    if (p == 0.0) continue;
    const int a = idx[static_cast<std::size_t>(a_axis)];
    const std::int64_t config = config_of(clf, axes, idx);
    const int decided = clf.decisions[static_cast<std::size_t>(config)];
    mass[static_cast<std::size_t>(a * clf.label_card + decided)] += p;
    group_mass[a] += p;
  } while (next_cell(idx, cards));

  if (group_mass[0] <= 0.0 || group_mass[1] <= 0.0)
    throw DegenerateEvidenceError("one protected group carries no probability mass");

  detail::CompensatedSum kl;
  for (int y = 0; y < clf.label_card; ++y) {
    const double p0 = mass[static_cast<std::size_t>(y)] / group_mass[0];
    if (p0 == 0.0) continue;
    double p1 = mass[static_cast<std::size_t>(clf.label_card + y)] / group_mass[1];
    if (p1 == 0.0) p1 = kDenominatorFloor;
    kl.add(p0 * log2_of(p0 / p1));
  }
  return kl.value();
}

SweepReport removal_sweep(const JointDistribution& dist) {
  const int n = static_cast<int>(dist.schema().feature_indices().size());
  if (n < 2) throw ArgumentError("removal sweep needs at least 2 features");

  auto entry_for = [&](SubsetKey key, int removed) {
    const PluginClassifier clf = bayes_classifier(dist, key);
    const ClassifierMetrics metrics = classifier_error(clf, dist);
    SweepEntry entry;
    entry.removed = removed;
    entry.error_01 = metrics.error_01;
    entry.cross_entropy = metrics.cross_entropy;
    entry.bias_kl = bias_kl(clf, dist);
    return entry;
  };

  SweepReport report;
  report.baseline = entry_for(SubsetKey::full(n), -1);
  report.removed.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    report.removed.push_back(entry_for(SubsetKey::full(n).without(i), i));
  return report;
}

}  // namespace fairsel
