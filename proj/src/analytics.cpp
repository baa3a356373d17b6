#include "crowdsurvey/analytics.hpp"

#include <algorithm>
#include <cmath>

namespace crowdsurvey {

PowerRanking power_ranking(const ModelArtifact& artifact) {
  PowerRanking ranking;
  ranking.reserve(artifact.k);
  for (std::size_t j = 0; j < artifact.k; ++j) ranking.emplace_back(artifact.col_ids[j], artifact.d[j]);
  std::stable_sort(ranking.begin(), ranking.end(),
                   [](const auto& x, const auto& y) { return x.second > y.second; });
  return ranking;
}

PowerLawFit loglog_fit(std::span<const double> values, std::size_t m) {
  if (m < 3 || values.size() < m) {
    throw SurveyError(ErrorCode::TooFewValues,
                      "need m >= 3 values, have " + std::to_string(values.size()) + " for m=" +
                          std::to_string(m));
  }
  for (std::size_t r = 0; r < m; ++r) {
    if (!(values[r] > 0.0)) {
      throw SurveyError(ErrorCode::NonPositiveValue,
                        "value at rank " + std::to_string(r + 1) + " is not positive");
    }
  }

  double mean_x = 0.0;
  double mean_y = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    mean_x += std::log(static_cast<double>(r + 1));
    mean_y += std::log(values[r]);
  }
  mean_x /= static_cast<double>(m);
  mean_y /= static_cast<double>(m);

  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    const double dx = std::log(static_cast<double>(r + 1)) - mean_x;
    const double dy = std::log(values[r]) - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }

  PowerLawFit fit;
  fit.m = m;
  fit.slope = sxy / sxx;
  fit.intercept = mean_y - fit.slope * mean_x;
  // Equal values lie exactly on a flat line.
  fit.fit_r2 = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  return fit;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw SurveyError(ErrorCode::DimensionMismatch, "pearson needs paired data");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ResponsePowerScatter response_power_scatter(const Store& store, const ModelArtifact& artifact) {
  ResponsePowerScatter scatter;
  std::vector<double> counts;
  std::vector<double> powers;
  for (std::size_t j = 0; j < artifact.k; ++j) {
    const QuestionId qid = artifact.col_ids[j];
    const std::size_t responses = store.find_question(qid) ? store.response_count(qid) : 0;
    scatter.points.push_back({qid, responses, artifact.d[j]});
    counts.push_back(static_cast<double>(responses));
    powers.push_back(artifact.d[j]);
  }
  scatter.correlation = pearson(counts, powers);
  return scatter;
}

std::size_t ParticipationMatrix::count() const {
  std::size_t total = 0;
  for (const auto& row : cells) total += static_cast<std::size_t>(std::count(row.begin(), row.end(), true));
  return total;
}

ParticipationMatrix participation_matrix(const Store& store) {
  ParticipationMatrix matrix;
  matrix.cols = approved_columns(store);
  std::vector<const Participant*> people;
  for (const auto& p : store.participants()) {
    if (!p.withdrawn) people.push_back(&p);
  }
  std::stable_sort(people.begin(), people.end(), [](const Participant* x, const Participant* y) {
    return std::tie(x->registered_at, x->id) < std::tie(y->registered_at, y->id);
  });
  for (const auto* p : people) {
    matrix.rows.push_back(p->id);
    std::vector<bool> row(matrix.cols.size());
    for (std::size_t j = 0; j < matrix.cols.size(); ++j) {
      row[j] = store.response(p->id, matrix.cols[j]) != nullptr;
    }
    matrix.cells.push_back(std::move(row));
  }
  return matrix;
}

DishonestyReport dishonesty_scan(const Store& store) {
  DishonestyReport report;
  for (const auto& [key, r] : store.responses()) {
    const auto& q = store.question(key.second);
    if (q.kind != AnswerKind::Numeric || !q.bounds) continue;
    if (!q.bounds->contains(r.raw_value)) {
      report.flagged.push_back({r.participant_id, r.question_id, r.raw_value, *q.bounds});
    }
  }
  return report;
}

std::vector<QualityPoint> model_quality_series(std::span<const ModelArtifact> history) {
  std::vector<QualityPoint> series;
  series.reserve(history.size());
  for (const auto& a : history) series.push_back({a.built_at, a.model_r2});
  return series;
}

namespace {

// RFC 4180 quoting for free-text fields.
std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string quoted = "\"";
  for (char ch : text) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  return quoted + '"';
}

struct PrecisionGuard {
  explicit PrecisionGuard(std::ostream& out) : out_(out), saved_(out.precision(17)) {}
  ~PrecisionGuard() { out_.precision(saved_); }
  std::ostream& out_;
  std::streamsize saved_;
};

}  // namespace

void write_ranking_csv(std::ostream& out, const PowerRanking& ranking, const Store& store) {
  PrecisionGuard guard(out);
  out << "rank,question_id,r2,responses,text\n";
  std::size_t rank = 1;
  for (const auto& [qid, d] : ranking) {
    const auto* q = store.find_question(qid);
    out << rank++ << ',' << qid.value << ',' << d << ',' << (q ? store.response_count(qid) : 0) << ','
        << csv_field(q ? q->text : std::string()) << '\n';
  }
}

void write_powerlaw_report(std::ostream& out, const PowerRanking& ranking, std::size_t m) {
  PrecisionGuard guard(out);
  std::vector<double> positive;
  for (const auto& entry : ranking) {
    if (entry.second > 0.0) positive.push_back(entry.second);
  }
  const std::size_t used = std::min(m, positive.size());
  out << "# descriptive fit: OLS of ln(r2) on ln(rank) over the top questions\n";
  try {
    const auto fit = loglog_fit(positive, used);
    out << "m=" << fit.m << "\nslope=" << fit.slope << "\nintercept=" << fit.intercept
        << "\nfit_r2=" << fit.fit_r2 << '\n';
  } catch (const SurveyError& e) {
    out << "m=" << used << "\nstatus=" << to_string(e.code()) << '\n';
  }
}

void write_participation_csv(std::ostream& out, const ParticipationMatrix& matrix) {
  out << "participant_id";
  for (auto q : matrix.cols) out << ",q" << q.value;
  out << '\n';
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    out << matrix.rows[i].value;
    for (bool cell : matrix.cells[i]) out << ',' << (cell ? 1 : 0);
    out << '\n';
  }
}

void write_participation_pgm(std::ostream& out, const ParticipationMatrix& matrix) {
  // Plain PGM, maxval 1: a black (0) pixel marks a response.
  out << "P2\n" << matrix.cols.size() << ' ' << matrix.rows.size() << "\n1\n";
  for (const auto& row : matrix.cells) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << (row[j] ? 0 : 1);
    out << '\n';
  }
}

void write_quality_csv(std::ostream& out, std::span<const QualityPoint> series) {
  PrecisionGuard guard(out);
  out << "timestamp_ms,model_r2\n";
  for (const auto& p : series) out << p.at << ',' << p.model_r2 << '\n';
}

void write_response_power_csv(std::ostream& out, const ResponsePowerScatter& scatter) {
  PrecisionGuard guard(out);
  out << "question_id,responses,r2\n";
  for (const auto& p : scatter.points) out << p.question_id.value << ',' << p.responses << ',' << p.d << '\n';
  out << "# pearson=";
  if (scatter.correlation) {
    out << *scatter.correlation;
  } else {
    out << "undefined";
  }
  out << '\n';
}

void write_dishonesty_csv(std::ostream& out, const DishonestyReport& report) {
  PrecisionGuard guard(out);
  out << "participant_id,question_id,value,min,max\n";
  for (const auto& f : report.flagged) {
    out << f.participant_id.value << ',' << f.question_id.value << ',' << f.raw_value << ','
        << f.bounds.min << ',' << f.bounds.max << '\n';
  }
}

ModelReport model_report(const DesignMatrix& design, double lambda, int min_samples,
                         std::uint64_t source_seq) {
  ModelReport report;
  report.artifact = fit_design(design, lambda, min_samples, source_seq);
  try {
    report.significance = coeff_significance(design.a, design.b, report.artifact.c);
  } catch (const SurveyError& e) {
    if (e.code() != ErrorCode::InsufficientDegreesOfFreedom && e.code() != ErrorCode::RankDeficient) throw;
    report.significance_status = std::string(to_string(e.code()));
  }
  return report;
}

void write_model_csv(std::ostream& out, const ModelReport& report, const Store& store) {
  PrecisionGuard guard(out);
  const auto& a = report.artifact;
  out << "# n=" << a.n << " k=" << a.k << " lambda=" << a.lambda << " model_r2=" << a.model_r2;
  if (!report.significance) out << " significance=" << report.significance_status;
  out << '\n';
  out << "term,question_id,coefficient,std_error,t_stat,p_value,r2,text\n";
  for (std::size_t j = 0; j <= a.k; ++j) {
    if (j == 0) out << "intercept,";
    else out << "q" << a.col_ids[j - 1].value << ',' << a.col_ids[j - 1].value;
    out << ',' << a.c[j] << ',';
    if (report.significance) {
      out << report.significance->std_error[j] << ',' << report.significance->t_stat[j] << ','
          << report.significance->p_value[j];
    } else {
      out << ",,";
    }
    out << ',';
    if (j > 0) out << a.d[j - 1] << ',' << csv_field(store.question(a.col_ids[j - 1]).text);
    else out << ',';
    out << '\n';
  }
}

}  // namespace crowdsurvey
