#pragma once

// Raw cohort files as written by `simulate --out DIR`:
//   participants.json  {"schema_version":1,"participants":[{"id","tz_offset_min"}]}
//   events.ndjson      one wire-format SensorEvent per line
//   ema.ndjson         one wire-format K10Response per line, arrival order

#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ewellness/featurizer.hpp"
#include "ewellness/wire.hpp"

namespace ewellness {

inline constexpr int kRawSchemaVersion = 1;
inline const std::vector<std::string> kRawFileNames = {"participants.json", "events.ndjson", "ema.ndjson"};

inline void write_raw_cohort(const std::filesystem::path& dir, std::span<const ParticipantHistory> cohort) {
  std::filesystem::create_directories(dir);
  nlohmann::json index{{"schema_version", kRawSchemaVersion}, {"participants", nlohmann::json::array()}};
  std::ofstream events(dir / "events.ndjson", std::ios::binary | std::ios::trunc);
  std::ofstream emas(dir / "ema.ndjson", std::ios::binary | std::ios::trunc);
  for (const auto& p : cohort) {
    index["participants"].push_back({{"id", p.id.str()}, {"tz_offset_min", p.tz_offset_minutes}});
    for (const auto& e : p.events) events << wire::to_json(e).dump() << '\n';
    for (const auto& r : p.emas) emas << wire::to_json(r).dump() << '\n';
  }
  std::ofstream(dir / "participants.json", std::ios::binary | std::ios::trunc) << index.dump(2) << '\n';
  if (!events || !emas) throw Error("cannot write raw files under " + dir.string());
}

inline std::vector<ParticipantHistory> read_raw_cohort(const std::filesystem::path& dir) {
  std::ifstream index_in(dir / "participants.json", std::ios::binary);
  if (!index_in) throw NotFoundError("missing " + (dir / "participants.json").string());
  const auto index = nlohmann::json::parse(index_in);
  if (index.value("schema_version", 0) != kRawSchemaVersion) {
    throw ValidationError("schema_version", "unsupported raw file version");
  }
  std::vector<ParticipantHistory> cohort;
  std::map<ParticipantId, std::size_t> slot;
  for (const auto& p : index.at("participants")) {
    ParticipantHistory h;
    h.id = ParticipantId(p.at("id").get<std::string>());
    h.tz_offset_minutes = p.at("tz_offset_min").get<int>();
    slot[h.id] = cohort.size();
    cohort.push_back(std::move(h));
  }
  auto owner = [&](const ParticipantId& id, std::size_t line, const char* file) -> ParticipantHistory& {
    auto it = slot.find(id);
    if (it == slot.end()) {
      throw ValidationError(std::string(file) + ":" + std::to_string(line), "unknown participant " + id.str());
    }
    return cohort[it->second];
  };
  auto each_line = [&](const char* file, auto&& fn) {
    std::ifstream in(dir / file, std::ios::binary);
    if (!in) throw NotFoundError("missing " + (dir / file).string());
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      if (!line.empty()) fn(nlohmann::json::parse(line), n);
    }
  };
  each_line("events.ndjson", [&](const nlohmann::json& j, std::size_t n) {
    auto e = wire::event_from_json(j);
    owner(e.participant, n, "events.ndjson").events.push_back(std::move(e));
  });
  each_line("ema.ndjson", [&](const nlohmann::json& j, std::size_t n) {
    auto r = wire::k10_from_json(j);
    owner(r.participant, n, "ema.ndjson").emas.push_back(std::move(r));
  });
  return cohort;
}

}  // namespace ewellness
