#include "prefplan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "prefplan/error.hpp"

namespace prefplan::eval {

BaselineDraw pr_baseline_predict(const data::Example& example, const sim::NoiseLevel& level,
                                 const prefs::PreferenceModel& model, Pcg32& rng) {
  const auto consistent = prefs::consistent_set(example.queries(level), model.universe());
  const auto& from = consistent.empty() ? model.universe() : consistent;
  return {from[rng.bounded(static_cast<std::uint32_t>(from.size()))], consistent.size()};
}

std::vector<PredictionRecord> pr_baseline(const std::vector<const data::Example*>& examples,
                                          const sim::NoiseLevel& level, const prefs::PreferenceModel& model,
                                          std::uint64_t seed) {
  std::vector<PredictionRecord> out;
  out.reserve(examples.size());
  for (const auto* ex : examples) {
    Pcg32 rng = make_stream(seed, ex->id);
    const auto draw = pr_baseline_predict(*ex, level, model, rng);
    PredictionRecord r;
    r.id = ex->id;
    r.predicted = draw.preference;
    r.truth = ex->ground_truth;
    r.consistent_size = draw.consistent_size;
    r.consistent = prefs::is_consistent(r.predicted, ex->queries_clean);
    out.push_back(std::move(r));
  }
  return out;
}

prefs::Preference argmax_preference(const std::vector<std::vector<double>>& probabilities) {
  prefs::Preference p;
  for (const auto& head : probabilities) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < head.size(); ++k) {
      if (head[k] > head[best]) best = k;
    }
    p.values.push_back(static_cast<int>(best));
  }
  return p;
}

std::vector<PredictionRecord> nn_predict(nn::Model& network, const std::vector<const data::Example*>& examples,
                                         const sim::NoiseLevel& level, const data::Vocabulary& vocab,
                                         std::size_t chunk) {
  std::vector<PredictionRecord> out;
  out.reserve(examples.size());
  for (std::size_t begin = 0; begin < examples.size(); begin += chunk) {
    const std::size_t end = std::min(examples.size(), begin + chunk);
    std::vector<data::TokenizedQuerySequence> seqs;
    for (std::size_t i = begin; i < end; ++i) seqs.push_back(data::tokenize(*examples[i], level, vocab));
    std::vector<const data::TokenizedQuerySequence*> ptrs;
    for (const auto& s : seqs) ptrs.push_back(&s);
    const auto probs = network.predict(nn::make_batch(ptrs));
    for (std::size_t i = begin; i < end; ++i) {
      PredictionRecord r;
      r.id = examples[i]->id;
      r.truth = examples[i]->ground_truth;
      for (const auto& head : probs) {
        const auto row = head.row(static_cast<Eigen::Index>(i - begin));
        r.probabilities.emplace_back(row.data(), row.data() + row.size());
      }
      r.predicted = argmax_preference(r.probabilities);
      r.consistent = prefs::is_consistent(r.predicted, examples[i]->queries_clean);
      out.push_back(std::move(r));
    }
  }
  return out;
}

double tpr(const std::vector<PredictionRecord>& records) {
  if (records.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : records) hits += r.predicted == r.truth;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double aor(const std::vector<PredictionRecord>& records) {
  if (records.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : records) hits += r.consistent;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double pr_expected_tpr(const std::vector<const data::Example*>& examples, const sim::NoiseLevel& level,
                       const prefs::PreferenceModel& model) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const auto* ex : examples) {
    const auto consistent = prefs::consistent_set(ex->queries(level), model.universe());
    if (consistent.empty()) {
      total += 1.0 / static_cast<double>(model.universe().size());
    } else if (std::find(consistent.begin(), consistent.end(), ex->ground_truth) != consistent.end()) {
      total += 1.0 / static_cast<double>(consistent.size());
    }
  }
  return total / static_cast<double>(examples.size());
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

std::string to_string(Metric m) { return m == Metric::TPR ? "TPR" : "AOR"; }

std::string Column::label() const {
  std::string name = model;
  if (model == "single_target") name = "Single Target";
  if (model == "distribution") name = "Distribution";
  if (model == "noisy_distribution") name = "Noisy Distribution";
  if (model == "pr_baseline") return "PR";
  return name + " (β_train=" + (beta_train == "none" ? "∅" : beta_train) + ")";
}

std::vector<Column> table_columns() {
  std::vector<Column> cols;
  for (const char* b : {"none", "10", "1", "0.5"}) cols.push_back({"single_target", "ce", "single", b});
  for (const char* b : {"none", "10", "1", "0.5"}) cols.push_back({"distribution", "kl", "distribution", b});
  for (const char* b : {"10", "1", "0.5"}) cols.push_back({"noisy_distribution", "kl", "noisy-distribution", b});
  cols.push_back({"pr_baseline", "-", "-", "-"});
  return cols;
}

CellStats summarize(const std::vector<double>& values) {
  CellStats s;
  s.n_seeds = values.size();
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

ReportMatrix build_report(const std::vector<Column>& columns, const std::vector<Evaluator>& evaluators,
                          const std::vector<sim::NoiseLevel>& beta_eval, const std::vector<std::uint64_t>& seeds) {
  if (columns.size() != evaluators.size()) throw Error("CONFIG", "inference-eval", "one evaluator per column");
  ReportMatrix report;
  report.columns = columns;
  report.beta_eval = beta_eval;
  report.cells.resize(columns.size());
  report.errors.resize(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    std::vector<std::array<std::optional<CellStats>, 2>> col(beta_eval.size());
    try {
      for (std::size_t b = 0; b < beta_eval.size(); ++b) {
        std::vector<double> t, a;
        for (auto seed : seeds) {
          const auto records = evaluators[c](beta_eval[b], seed);
          t.push_back(tpr(records));
          a.push_back(aor(records));
          if (a.back() < t.back()) {
            throw Error("INVARIANT", "inference-eval", "AOR < TPR for " + columns[c].label() + " at " + beta_eval[b].key());
          }
        }
        col[b][0] = summarize(t);
        col[b][1] = summarize(a);
      }
      report.cells[c] = std::move(col);
    } catch (const Error& e) {
      if (e.code() == "INVARIANT") throw;
      report.errors[c] = e.code() + ": " + e.what();
    } catch (const std::exception& e) {
      report.errors[c] = e.what();
    }
  }
  return report;
}

void write_report_csv(const ReportMatrix& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("IO", "inference-eval", "cannot write " + path);
  out.precision(17);
  out << "model,loss_kind,target_kind,beta_train,beta_eval,metric,mean,std,n_seeds\n";
  for (std::size_t c = 0; c < report.columns.size(); ++c) {
    const auto& col = report.columns[c];
    for (std::size_t b = 0; b < report.beta_eval.size(); ++b) {
      for (Metric m : {Metric::TPR, Metric::AOR}) {
        out << col.model << ',' << col.loss_kind << ',' << col.target_kind << ',' << col.beta_train << ','
            << report.beta_eval[b].key() << ',' << to_string(m) << ',';
        if (report.cells[c].empty()) {
          out << "MISSING,MISSING,0\n";
        } else {
          const auto& s = *report.cells[c][b][static_cast<int>(m)];
          out << s.mean << ',' << s.std << ',' << s.n_seeds << '\n';
        }
      }
    }
  }
}

std::string report_markdown(const ReportMatrix& report) {
  std::ostringstream md;
  md << "| β_eval | metric |";
  for (const auto& col : report.columns) md << ' ' << col.label() << " |";
  md << "\n|---|---|";
  for (std::size_t c = 0; c < report.columns.size(); ++c) md << "---|";
  md << '\n';
  char buf[64];
  for (std::size_t b = 0; b < report.beta_eval.size(); ++b) {
    for (Metric m : {Metric::TPR, Metric::AOR}) {
      const std::string key = report.beta_eval[b].key();
      md << "| " << (key == "none" ? "∅" : key) << " | " << to_string(m) << " |";
      for (std::size_t c = 0; c < report.columns.size(); ++c) {
        if (report.cells[c].empty()) {
          md << " MISSING |";
          continue;
        }
        const auto& s = *report.cells[c][b][static_cast<int>(m)];
        std::snprintf(buf, sizeof buf, " %.3f ± %.3f |", s.mean, s.std);
        md << buf;
      }
      md << '\n';
    }
  }
  bool any = false;
  for (std::size_t c = 0; c < report.columns.size(); ++c) {
    if (report.errors[c].empty()) continue;
    if (!any) md << "\nMissing cells:\n\n";
    any = true;
    md << "- " << report.columns[c].label() << ": " << report.errors[c] << '\n';
  }
  return md.str();
}

void write_report_md(const ReportMatrix& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("IO", "inference-eval", "cannot write " + path);
  out << report_markdown(report);
}

}  // namespace prefplan::eval
