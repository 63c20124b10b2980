#include "keydyn/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "keydyn/errors.hpp"

namespace keydyn::metrics {

using events::Label;

ConfusionCounts confusion(const std::vector<Label>& truth,
                          const std::vector<Label>& predicted) {
  if (truth.size() != predicted.size() || truth.empty())
    throw Error(ErrorCode::LengthMismatch,
                "need equal-length, non-empty truth/prediction lists");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != Label::normal && truth[i] != Label::stress)
      throw Error(ErrorCode::NonBinaryLabels, "unlabeled truth row");
    if (predicted[i] != Label::normal && predicted[i] != Label::stress)
      throw Error(ErrorCode::NonBinaryLabels, "unlabeled prediction row");
    const bool t_stress = truth[i] == Label::stress;
    const bool p_stress = predicted[i] == Label::stress;
    if (t_stress && p_stress) ++c.tp;
    else if (!t_stress && !p_stress) ++c.tn;
    else if (!t_stress && p_stress) ++c.fp;
    else ++c.fn;
  }
  return c;
}

SplitMetrics split_metrics(const ConfusionCounts& c) {
  SplitMetrics m;
  m.counts = c;
  const auto ratio = [](std::size_t num,
                        std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision_stress = ratio(c.tp, c.tp + c.fp);
  m.recall_stress = ratio(c.tp, c.tp + c.fn);
  m.precision_normal = ratio(c.tn, c.tn + c.fn);
  m.recall_normal = ratio(c.tn, c.tn + c.fp);
  return m;
}

namespace {

std::string render(const std::optional<double>& v, const RenderOptions& opts,
                   const char* undefined_mark) {
  if (!v && !opts.undefined_as_zero) return undefined_mark;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", opts.precision, v.value_or(0.0));
  return buf;
}

struct NamedMetric {
  const char* name;
  std::optional<double> SplitMetrics::* field;
};

constexpr NamedMetric kMetrics[] = {
    {"accuracy", &SplitMetrics::accuracy},
    {"precision_stress", &SplitMetrics::precision_stress},
    {"recall_stress", &SplitMetrics::recall_stress},
    {"precision_normal", &SplitMetrics::precision_normal},
    {"recall_normal", &SplitMetrics::recall_normal},
};

}  // namespace

std::string to_csv(const std::vector<ModelReport>& reports,
                   const RenderOptions& opts) {
  std::ostringstream out;
  out << "model,split,metric,value\n";
  for (const auto& rep : reports) {
    const std::pair<const char*, const SplitMetrics*> splits[] = {
        {"train", &rep.train}, {"val", &rep.val}, {"test", &rep.test}};
    for (const auto& [split, m] : splits) {
      if (m->counts.total() == 0) continue;
      for (const auto& nm : kMetrics)
        out << rep.model << ',' << split << ',' << nm.name << ','
            << render(m->*nm.field, opts, "") << '\n';
    }
  }
  return out.str();
}

std::string to_markdown(const std::vector<ModelReport>& reports,
                        const RenderOptions& opts) {
  std::ostringstream out;
  out << "| model | accuracy | precision (stress) | recall (stress) "
         "| precision (normal) | recall (normal) |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const auto& rep : reports) {
    out << "| " << rep.model << " |";
    bool stress_col[] = {false, true, true, false, false};
    for (std::size_t i = 0; i < 5; ++i) {
      const auto field = kMetrics[i].field;
      // Anomaly fits see only normal rows, so train-side stress metrics
      // are meaningless and stay blank.
      const std::string train =
          rep.anomaly && stress_col[i] ? "\xE2\x80\x94"
                                       : render(rep.train.*field, opts,
                                                "\xE2\x80\x94");
      const std::string test = render(rep.test.*field, opts, "\xE2\x80\x94");
      out << ' ' << train << " / " << test << " |";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace keydyn::metrics
