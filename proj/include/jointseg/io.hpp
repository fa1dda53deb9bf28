// File formats: CSV ingestion of multi-series data (rows = time, columns =
// series) and versioned JSON documents for fits, simulation truth and
// score reports.
#pragma once

#include "jointseg/metrics.hpp"
#include "jointseg/selection.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace jointseg {

constexpr int kSchemaVersion = 1;

namespace detail {

inline bool parse_double(std::string_view cell, double& out) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last && std::isfinite(out);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

// Fixed, locale-independent float formatting so identical runs produce
// identical bytes.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Rectangular numeric CSV with an optional single header row (detected by
// a non-numeric first row). Rejects ragged rows, non-numeric or missing
// cells, and fewer than two data rows, naming the offending position.
inline SeriesMatrix ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");

  std::vector<std::vector<double>> rows;
  std::string line;
  size_t line_no = 0;
  size_t width = 0;
  bool header_checked = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (!header_checked) {
      header_checked = true;
      double v;
      bool numeric = true;
      for (const auto& c : cells)
        if (!detail::parse_double(c, v)) numeric = false;
      if (!numeric) continue;  // header row
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw data_error(path + ": row " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(width));
    std::vector<double> row(width);
    for (size_t c = 0; c < width; ++c) {
      if (!detail::parse_double(cells[c], row[c]))
        throw data_error(path + ": row " + std::to_string(line_no) +
                         ", column " + std::to_string(c + 1) +
                         ": not a finite number: '" + std::string(cells[c]) +
                         "'");
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2)
    throw data_error(path + ": need at least 2 data rows, got " +
                     std::to_string(rows.size()));

  Matrix values(rows.size(), width);
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < width; ++c) values(r, c) = rows[r][c];
  return SeriesMatrix(std::move(values));
}

inline void write_csv(const std::string& path, const Matrix& values) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write '" + path + "'");
  for (Eigen::Index c = 0; c < values.cols(); ++c)
    out << (c ? "," : "") << "s" << (c + 1);
  out << "\n";
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      out << (c ? "," : "") << detail::fmt_double(values(r, c));
    out << "\n";
  }
  if (!out) throw data_error("write failed for '" + path + "'");
}

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const size_t rows = j.size();
  const size_t cols = rows ? j.at(0).size() : 0;
  Matrix m(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (j.at(r).size() != cols) throw data_error("ragged matrix in JSON");
    for (size_t c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw data_error("write failed for '" + path + "'");
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw data_error(path + ": " + e.what());
  }
}

}  // namespace detail

// Breakpoint positions in all documents are 1-based segment ends,
// excluding n.
inline nlohmann::json fit_to_json(const SeriesMatrix& y, const ModelFit& fit) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "fit";
  j["n"] = y.n();
  j["m"] = y.m();
  j["k"] = fit.segmentation.total_segments();
  j["q"] = fit.factor.q();
  j["breakpoints"] = fit.segmentation.breakpoints;
  j["means"] = fit.means.means;
  std::vector<double> rm;
  rm.reserve(fit.factor.loadings.size());
  for (int r = 0; r < fit.factor.m(); ++r)
    for (int c = 0; c < fit.factor.q(); ++c)
      rm.push_back(fit.factor.loadings(r, c));
  j["loadings"] = {
      {"rows", fit.factor.m()},
      {"cols", fit.factor.q()},
      {"row_major", std::move(rm)},
      {"note",
       "identified only up to right-multiplication by an orthogonal matrix; "
       "compare sigma, not loadings"}};
  j["noise_mode"] = to_string(fit.factor.mode);
  j["noise_variances"] =
      std::vector<double>(fit.factor.psi.data(),
                          fit.factor.psi.data() + fit.factor.psi.size());
  if (fit.factor.mode == NoiseMode::homoscedastic)
    j["sigma2"] = fit.factor.sigma2();
  j["sigma"] = detail::matrix_to_json(assemble_sigma(fit.factor));
  j["loglik"] = fit.loglik;
  j["bic"] = bic_q(y, fit);
  bool degenerate = false;
  const double mb = mbic_k(y, fit, &degenerate);
  if (degenerate)
    j["mbic"] = nullptr;
  else
    j["mbic"] = mb;
  j["mbic_degenerate"] = degenerate;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  return j;
}

inline void emit_fit(const SeriesMatrix& y, const ModelFit& fit,
                     const std::string& path) {
  detail::write_json(fit_to_json(y, fit), path);
}

inline ModelFit parse_fit(const std::string& path) {
  const nlohmann::json j = detail::read_json(path);
  try {
    ModelFit fit;
    fit.segmentation = Segmentation(
        j.at("n").get<int>(),
        j.at("breakpoints").get<std::vector<std::vector<int>>>());
    fit.means.means = j.at("means").get<std::vector<std::vector<double>>>();
    fit.means.check_conforms(fit.segmentation);

    const int m = j.at("m").get<int>();
    const int q = j.at("q").get<int>();
    const auto rm = j.at("loadings").at("row_major").get<std::vector<double>>();
    if (static_cast<int>(rm.size()) != m * q)
      throw data_error("loadings size mismatch");
    Matrix b(m, q);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < q; ++c) b(r, c) = rm[r * q + c];
    const auto psi_v = j.at("noise_variances").get<std::vector<double>>();
    Vector psi = Eigen::Map<const Vector>(psi_v.data(), psi_v.size());
    const NoiseMode mode = j.at("noise_mode").get<std::string>() == "homoscedastic"
                               ? NoiseMode::homoscedastic
                               : NoiseMode::heteroscedastic;
    fit.factor = q == 0 ? FactorParams::diagonal(std::move(psi), mode)
                 : mode == NoiseMode::homoscedastic
                     ? FactorParams::homoscedastic(std::move(b), psi_v.at(0))
                     : FactorParams::heteroscedastic(std::move(b), std::move(psi));
    fit.loglik = j.at("loglik").get<double>();
    fit.iterations = j.at("iterations").get<int>();
    fit.converged = j.at("converged").get<bool>();
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw data_error(path + ": " + e.what());
  }
}

inline void emit_truth(const SimTruth& truth, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "truth";
  j["n"] = truth.segmentation.n;
  j["m"] = truth.segmentation.num_series();
  j["k"] = truth.segmentation.total_segments();
  j["breakpoints"] = truth.segmentation.breakpoints;
  j["means"] = truth.means.means;
  j["sigma"] = detail::matrix_to_json(truth.sigma);
  detail::write_json(j, path);
}

inline SimTruth parse_truth(const std::string& path) {
  const nlohmann::json j = detail::read_json(path);
  try {
    SimTruth truth;
    truth.segmentation = Segmentation(
        j.at("n").get<int>(),
        j.at("breakpoints").get<std::vector<std::vector<int>>>());
    truth.means.means = j.at("means").get<std::vector<std::vector<double>>>();
    truth.means.check_conforms(truth.segmentation);
    truth.sigma = detail::matrix_from_json(j.at("sigma"));
    truth.mean_matrix = expand_means(truth.segmentation, truth.means);
    return truth;
  } catch (const nlohmann::json::exception& e) {
    throw data_error(path + ": " + e.what());
  }
}

inline void emit_scores(const ScoreReport& rep, int window,
                        const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "scores";
  j["fpr"] = rep.fpr;
  j["tpr"] = rep.tpr;
  j["rmse_sigma"] = rep.rmse_sigma;
  j["rmse_mean"] = rep.rmse_mean;
  j["window"] = window;
  j["counts"] = {{"true", rep.counts.true_total},
                 {"detected", rep.counts.detected_total},
                 {"matched", rep.counts.matched}};
  detail::write_json(j, path);
}

}  // namespace jointseg
