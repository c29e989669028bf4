#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ewellness/event_model.hpp"
#include "ewellness/matrix.hpp"
#include "json.hpp"

namespace ewellness {

struct Provenance {
  ParticipantId participant;
  LocalDay day;
  auto operator<=>(const Provenance&) const = default;
};

// Feature matrix joined with K10 labels. Row i describes provenance[i].
struct LabeledDataset {
  std::vector<std::string> feature_names;
  Matrix rows;
  std::vector<int> k10_scores;
  std::vector<DistressLevel> levels;
  std::vector<Provenance> provenance;

  std::size_t size() const noexcept { return k10_scores.size(); }
  bool empty() const noexcept { return k10_scores.empty(); }

  std::vector<int> label_indices() const {
    std::vector<int> out(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) out[i] = static_cast<int>(levels[i]);
    return out;
  }

  // Throws ValidationError when the shape or label invariants are broken.
  void validate() const {
    const std::size_t n = k10_scores.size();
    if (rows.rows() != n || levels.size() != n || provenance.size() != n) {
      throw ValidationError("dataset", "row/label/provenance counts disagree");
    }
    if (n > 0 && rows.cols() != feature_names.size()) {
      throw ValidationError("dataset.rows", "row width differs from feature_names");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (categorize_k10(k10_scores[i]) != levels[i]) {
        throw ValidationError("dataset.levels[" + std::to_string(i) + "]", "does not match k10 score");
      }
      for (double v : rows.row(i)) {
        if (!std::isfinite(v)) throw ValidationError("dataset.rows[" + std::to_string(i) + "]", "non-finite value");
      }
    }
  }

  LabeledDataset subset(std::span<const std::size_t> idx) const {
    LabeledDataset out;
    out.feature_names = feature_names;
    out.rows = rows.select_rows(idx);
    for (std::size_t i : idx) {
      out.k10_scores.push_back(k10_scores[i]);
      out.levels.push_back(levels[i]);
      out.provenance.push_back(provenance[i]);
    }
    return out;
  }

  LabeledDataset with_columns(std::span<const std::size_t> cols) const {
    LabeledDataset out = *this;
    out.rows = rows.select_cols(cols);
    out.feature_names.clear();
    for (std::size_t c : cols) out.feature_names.push_back(feature_names[c]);
    return out;
  }

  bool operator==(const LabeledDataset&) const = default;
};

inline constexpr int kDatasetSchemaVersion = 1;

inline nlohmann::json to_json(const LabeledDataset& ds) {
  nlohmann::json j;
  j["schema_version"] = kDatasetSchemaVersion;
  j["feature_names"] = ds.feature_names;
  auto rows = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.rows.rows(); ++i) {
    auto r = ds.rows.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["rows"] = std::move(rows);
  j["k10_scores"] = ds.k10_scores;
  auto levels = nlohmann::json::array();
  for (auto l : ds.levels) levels.push_back(std::string(to_string(l)));
  j["levels"] = std::move(levels);
  auto prov = nlohmann::json::array();
  for (const auto& p : ds.provenance) prov.push_back({{"participant", p.participant.str()}, {"day", p.day.iso()}});
  j["provenance"] = std::move(prov);
  return j;
}

inline std::string dataset_json_string(const LabeledDataset& ds) { return to_json(ds).dump() + "\n"; }

inline LabeledDataset dataset_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("schema_version", 0) != kDatasetSchemaVersion) {
    throw ValidationError("schema_version", "unsupported dataset schema");
  }
  LabeledDataset ds;
  ds.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  for (const auto& r : j.at("rows")) ds.rows.append_row(r.get<std::vector<double>>());
  if (ds.rows.rows() == 0) ds.rows = Matrix(0, ds.feature_names.size());
  ds.k10_scores = j.at("k10_scores").get<std::vector<int>>();
  for (const auto& l : j.at("levels")) {
    const auto level = parse_distress_level(l.get<std::string>());
    if (!level) throw ValidationError("levels", "unknown distress level");
    ds.levels.push_back(*level);
  }
  for (const auto& p : j.at("provenance")) {
    ds.provenance.push_back({ParticipantId(p.at("participant").get<std::string>()),
                             LocalDay::parse(p.at("day").get<std::string>())});
  }
  ds.validate();
  return ds;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Header: feature_names..., k10_score, level, participant, day.
inline std::string dataset_csv_string(const LabeledDataset& ds) {
  std::ostringstream out;
  for (const auto& name : ds.feature_names) out << name << ',';
  out << "k10_score,level,participant,day\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.rows.row(i)) out << format_double(v) << ',';
    out << ds.k10_scores[i] << ',' << to_string(ds.levels[i]) << ',' << ds.provenance[i].participant.str() << ','
        << ds.provenance[i].day.iso() << '\n';
  }
  return out.str();
}

inline LabeledDataset dataset_from_csv(std::istream& in) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("csv", "empty input");
  auto header = split(line);
  if (header.size() < 4 || header[header.size() - 4] != "k10_score") {
    throw ValidationError("csv.header", "expected trailing k10_score,level,participant,day columns");
  }
  LabeledDataset ds;
  ds.feature_names.assign(header.begin(), header.end() - 4);
  const std::size_t nf = ds.feature_names.size();
  ds.rows = Matrix(0, nf);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != nf + 4) throw ValidationError("csv.line" + std::to_string(line_no), "wrong column count");
    std::vector<double> values(nf);
    for (std::size_t c = 0; c < nf; ++c) values[c] = std::stod(cells[c]);
    ds.rows.append_row(values);
    ds.k10_scores.push_back(std::stoi(cells[nf]));
    const auto level = parse_distress_level(cells[nf + 1]);
    if (!level) throw ValidationError("csv.line" + std::to_string(line_no), "unknown level");
    ds.levels.push_back(*level);
    ds.provenance.push_back({ParticipantId(cells[nf + 2]), LocalDay::parse(cells[nf + 3])});
  }
  ds.validate();
  return ds;
}

// Reads either format, chosen by extension (.csv) or content.
inline LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open dataset " + path);
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return dataset_from_csv(in);
  return dataset_from_json(nlohmann::json::parse(in));
}

}  // namespace ewellness
