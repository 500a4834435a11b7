#pragma once

// File formats: strict CSV parsing with line-numbered diagnostics and the
// versioned JSON schemas emitted by the command-line tool. All number
// parsing is locale-independent.

#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "dosekit/first_stage.hpp"
#include "dosekit/types.hpp"

namespace dosekit {

using json = nlohmann::json;

inline constexpr const char* kSchemaTag = "dosekit/v1";

namespace detail {
inline double parse_double(const std::string& tok, const std::string& file, std::size_t line) {
  double v = 0.0;
  const char* begin = tok.data();
  const char* end = tok.data() + tok.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw validation_error(file + ":" + std::to_string(line) + ": cannot parse number '" + tok + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open file: " + path);
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto toks = detail::split_csv_line(line);
    if (line_no == 1) {
      table.header = toks;
      continue;
    }
    std::vector<double> row;
    row.reserve(toks.size());
    for (const auto& t : toks) row.push_back(detail::parse_double(t, path, line_no));
    if (row.size() != table.header.size())
      throw validation_error(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(table.header.size()) + " columns, found " +
                             std::to_string(row.size()));
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw validation_error(path + ": empty file");
  return table;
}

// mu CSV: header "dose,mu", one row per dose.
struct MuTable {
  std::vector<double> doses;
  Vector mu;
};

inline MuTable read_mu_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 2)
    throw validation_error(path + ": expected two columns (dose,mu)");
  MuTable out;
  out.mu.resize(static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out.doses.push_back(t.rows[i][0]);
    out.mu[static_cast<Eigen::Index>(i)] = t.rows[i][1];
  }
  return out;
}

inline void write_mu_csv(const std::string& path, const std::vector<double>& doses,
                         const Vector& mu) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write file: " + path);
  out << "dose,mu\n";
  for (std::size_t i = 0; i < doses.size(); ++i)
    out << detail::format_double(doses[i]) << ","
        << detail::format_double(mu[static_cast<Eigen::Index>(i)]) << "\n";
}

// covariance CSV: header row of dose labels, then a dense K x K block.
inline Matrix read_cov_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const std::size_t k = t.header.size();
  if (t.rows.size() != k)
    throw validation_error(path + ": covariance must be square (" + std::to_string(k) +
                           " columns, " + std::to_string(t.rows.size()) + " rows)");
  Matrix s(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.rows[i][j];
  return s;
}

inline void write_cov_csv(const std::string& path, const std::vector<double>& doses,
                          const Matrix& s) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write file: " + path);
  for (std::size_t i = 0; i < doses.size(); ++i)
    out << (i ? "," : "") << detail::format_double(doses[i]);
  out << "\n";
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.cols(); ++j) out << (j ? "," : "") << detail::format_double(s(i, j));
    out << "\n";
  }
}

// Candidate model sets: {"models":[{"family":...,"guesstimates":[...]}],
// "doses":[...], "placAdj":bool}
struct ModelSet {
  std::vector<CandidateModel> models;
  DoseDesign design;
};

inline ModelSet model_set_from_json(const json& j) {
  if (!j.contains("models") || !j.contains("doses"))
    throw validation_error("model set JSON needs 'models' and 'doses'");
  const bool plac_adj = j.value("placAdj", false);
  std::vector<double> doses = j.at("doses").get<std::vector<double>>();
  std::vector<CandidateModel> models;
  for (const auto& jm : j.at("models")) {
    const auto fam = family_from_string(jm.at("family").get<std::string>());
    std::vector<double> guess;
    if (jm.contains("guesstimates")) guess = jm.at("guesstimates").get<std::vector<double>>();
    models.emplace_back(fam, std::move(guess));
  }
  if (models.empty()) throw validation_error("model set JSON contains no models");
  return {std::move(models), DoseDesign(std::move(doses), plac_adj)};
}

inline ModelSet read_models_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw validation_error(path + ": invalid JSON: " + e.what());
  }
  return model_set_from_json(j);
}

inline json model_set_to_json(const ModelSet& set) {
  json j;
  j["schema"] = kSchemaTag;
  j["doses"] = set.design.doses();
  j["placAdj"] = set.design.placebo_adjusted();
  j["models"] = json::array();
  for (const auto& m : set.models)
    j["models"].push_back({{"family", family_name(m.family)}, {"guesstimates", m.guesstimates}});
  return j;
}

inline json estimate_to_json(const AnovaEstimate& est) {
  json j;
  j["schema"] = kSchemaTag;
  j["doses"] = est.design.doses();
  j["placAdj"] = est.plac_adj;
  j["mu"] = std::vector<double>(est.mu_hat.data(), est.mu_hat.data() + est.mu_hat.size());
  json cov = json::array();
  for (Eigen::Index i = 0; i < est.S.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index jx = 0; jx < est.S.cols(); ++jx) row.push_back(est.S(i, jx));
    cov.push_back(row);
  }
  j["cov"] = cov;
  return j;
}

inline AnovaEstimate estimate_from_json(const json& j) {
  std::vector<double> doses = j.at("doses").get<std::vector<double>>();
  const bool plac_adj = j.value("placAdj", false);
  std::vector<double> mu = j.at("mu").get<std::vector<double>>();
  const auto& cov = j.at("cov");
  const auto k = static_cast<Eigen::Index>(mu.size());
  Matrix s(k, k);
  if (static_cast<Eigen::Index>(cov.size()) != k)
    throw validation_error("estimate JSON: cov dimension mismatch");
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index jx = 0; jx < k; ++jx) s(i, jx) = cov[static_cast<std::size_t>(i)][static_cast<std::size_t>(jx)].get<double>();
  Vector muv = Eigen::Map<Vector>(mu.data(), k);
  return AnovaEstimate(DoseDesign(std::move(doses), plac_adj), muv, s);
}

inline AnovaEstimate read_estimate_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw validation_error(path + ": invalid JSON: " + e.what());
  }
  return estimate_from_json(j);
}

// Subject-level CSV readers. Formats: dose,resp (normal and count),
// dose,successes,trials (binary), dose,time,event (time-to-event).
inline std::vector<NormalRow> read_normal_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 2) throw validation_error(path + ": expected columns dose,resp");
  std::vector<NormalRow> rows;
  for (const auto& r : t.rows) rows.push_back({r[0], r[1]});
  return rows;
}

inline std::vector<CountRow> read_count_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 2) throw validation_error(path + ": expected columns dose,resp");
  std::vector<CountRow> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double v = t.rows[i][1];
    if (v < 0 || v != std::floor(v))
      throw validation_error(path + ":" + std::to_string(i + 2) + ": counts must be nonnegative integers");
    rows.push_back({t.rows[i][0], static_cast<long>(v)});
  }
  return rows;
}

inline std::vector<BinaryGroup> read_binary_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 3) throw validation_error(path + ": expected columns dose,successes,trials");
  std::vector<BinaryGroup> rows;
  for (const auto& r : t.rows)
    rows.push_back({r[0], static_cast<long>(r[1]), static_cast<long>(r[2])});
  return rows;
}

inline std::vector<TteRow> read_tte_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 3) throw validation_error(path + ": expected columns dose,time,event");
  std::vector<TteRow> rows;
  for (const auto& r : t.rows) rows.push_back({r[0], r[1], r[2] != 0.0});
  return rows;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write file: " + path);
  out << content;
}

inline void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace dosekit
