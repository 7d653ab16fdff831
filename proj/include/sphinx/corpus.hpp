#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "sphinx/error.hpp"

// Canonical record model and JSONL / language-table I/O shared by every
// pipeline stage.
//
// Interchange format: JSONL, UTF-8, LF line endings, no BOM. Keys are always
// emitted in the order (id, source_id, lang, system, human, assistant) so
// equal record sequences serialize to identical bytes and file diffs stay
// meaningful.

namespace sphinx {

/// One system/human/assistant triple with language tag and lineage ids.
/// `system` may be empty; `assistant` may be empty before augmentation.
struct InstructionRecord {
  std::string id;
  std::string source_id;
  std::string lang;
  std::string system;
  std::string human;
  std::string assistant;

  bool operator==(const InstructionRecord&) const = default;
};

enum class ResourceTier { High, Mid, Low };

inline const char* to_string(ResourceTier t) {
  switch (t) {
    case ResourceTier::High: return "High";
    case ResourceTier::Mid: return "Mid";
    case ResourceTier::Low: return "Low";
  }
  return "?";
}

/// Default per-tier sampling quotas.
inline std::size_t default_quota(ResourceTier t) {
  switch (t) {
    case ResourceTier::High: return 100000;
    case ResourceTier::Mid: return 50000;
    case ResourceTier::Low: return 25000;
  }
  return 0;
}

/// A language row: opaque code, display name, script, tier, sampling quota.
/// Codes are matched verbatim against record `lang` tags; no normalization
/// (the roster mixes 2-letter and script-suffixed codes such as zh-Hans).
struct LanguageSpec {
  std::string code;
  std::string name;
  std::string script;
  ResourceTier tier = ResourceTier::Low;
  std::size_t quota = 0;

  bool operator==(const LanguageSpec&) const = default;
};

/// Ordered language roster with code lookup.
class LanguageTable {
 public:
  LanguageTable() = default;

  explicit LanguageTable(std::vector<LanguageSpec> specs) : specs_(std::move(specs)) {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      if (!by_code_.emplace(specs_[i].code, i).second) {
        throw Error::data("duplicate language code '" + specs_[i].code + "'");
      }
    }
  }

  const std::vector<LanguageSpec>& specs() const { return specs_; }
  bool empty() const { return specs_.empty(); }
  std::size_t size() const { return specs_.size(); }

  const LanguageSpec* find(std::string_view code) const {
    auto it = by_code_.find(std::string(code));
    return it == by_code_.end() ? nullptr : &specs_[it->second];
  }

  const LanguageSpec& at(std::string_view code) const {
    const LanguageSpec* spec = find(code);
    if (!spec) throw Error::data("unknown language code '" + std::string(code) + "'");
    return *spec;
  }

 private:
  std::vector<LanguageSpec> specs_;
  std::unordered_map<std::string, std::size_t> by_code_;
};

/// First violated invariant, or nullopt if the record is valid. When `table`
/// is given, the record's lang must be present in it.
inline std::optional<std::string> validate_record(const InstructionRecord& rec,
                                                  const LanguageTable* table = nullptr) {
  if (rec.id.empty()) return "id is empty";
  if (rec.human.empty()) return "human is empty";
  if (table && !table->find(rec.lang)) return "lang '" + rec.lang + "' not in language table";
  return std::nullopt;
}

namespace detail {

inline std::string json_type_name(const nlohmann::json& v) {
  return std::string(v.type_name());
}

inline InstructionRecord record_from_json(const nlohmann::json& obj, std::size_t line_no) {
  static constexpr const char* kKeys[] = {"id", "source_id", "lang", "system", "human", "assistant"};
  if (!obj.is_object()) {
    throw Error::data("line " + std::to_string(line_no) + ": expected a JSON object, got " +
                      json_type_name(obj));
  }
  InstructionRecord rec;
  std::string* fields[] = {&rec.id, &rec.source_id, &rec.lang, &rec.system, &rec.human, &rec.assistant};
  for (std::size_t i = 0; i < 6; ++i) {
    auto it = obj.find(kKeys[i]);
    if (it == obj.end()) {
      throw Error::data("line " + std::to_string(line_no) + ": missing key \"" + kKeys[i] + "\"");
    }
    if (!it->is_string()) {
      throw Error::data("line " + std::to_string(line_no) + ": key \"" + kKeys[i] +
                        "\" must be a string, got " + json_type_name(*it));
    }
    *fields[i] = it->get<std::string>();
  }
  return rec;
}

}  // namespace detail

/// Parses one JSONL line into a record. Throws Error(Data) naming the line on
/// malformed JSON or schema violations.
inline InstructionRecord parse_record_line(std::string_view line, std::size_t line_no) {
  nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
  if (obj.is_discarded()) {
    throw Error::data("line " + std::to_string(line_no) + ": malformed JSON");
  }
  return detail::record_from_json(obj, line_no);
}

/// Reads a JSONL record file. Every record is validated; duplicate ids and
/// schema violations are reported with their line number.
inline std::vector<InstructionRecord> read_records(const std::string& path,
                                                   const LanguageTable* table = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error::io("cannot open '" + path + "' for reading");

  std::vector<InstructionRecord> records;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    InstructionRecord rec = parse_record_line(line, line_no);
    if (auto err = validate_record(rec, table)) {
      throw Error::data("line " + std::to_string(line_no) + ": " + *err);
    }
    if (!seen_ids.insert(rec.id).second) {
      throw Error::data("line " + std::to_string(line_no) + ": duplicate id \"" + rec.id + "\"");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

/// Serializes one record as a single JSON line (no trailing newline) with the
/// fixed key order. Byte-deterministic for equal records.
inline std::string record_to_line(const InstructionRecord& rec) {
  nlohmann::ordered_json obj;
  obj["id"] = rec.id;
  obj["source_id"] = rec.source_id;
  obj["lang"] = rec.lang;
  obj["system"] = rec.system;
  obj["human"] = rec.human;
  obj["assistant"] = rec.assistant;
  return obj.dump();
}

template <typename RecordRange>
inline void write_records(const RecordRange& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error::io("cannot open '" + path + "' for writing");
  for (const InstructionRecord& rec : records) {
    out << record_to_line(rec) << '\n';
  }
  out.flush();
  if (!out) throw Error::io("write failure on '" + path + "'");
}

namespace detail {

inline std::vector<std::string> split_tsv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline ResourceTier parse_tier(const std::string& value, std::size_t line_no) {
  if (value == "High") return ResourceTier::High;
  if (value == "Mid") return ResourceTier::Mid;
  if (value == "Low") return ResourceTier::Low;
  throw Error::data("line " + std::to_string(line_no) + ": unknown tier \"" + value +
                    "\" (expected High, Mid or Low)");
}

}  // namespace detail

/// Loads the tab-separated language table. Header must name the columns
/// `code name script tier` with an optional trailing `quota`; a missing or
/// empty quota cell gets the tier default (100000/50000/25000).
inline LanguageTable load_language_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error::io("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(in, line)) throw Error::data("language table '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto header = detail::split_tsv_row(line);
  const std::vector<std::string> required = {"code", "name", "script", "tier"};
  for (std::size_t i = 0; i < required.size(); ++i) {
    if (header.size() <= i || header[i] != required[i]) {
      throw Error::data("language table header must start with 'code\\tname\\tscript\\ttier'");
    }
  }
  const bool has_quota_column = header.size() > 4 && header[4] == "quota";

  std::vector<LanguageSpec> specs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = detail::split_tsv_row(line);
    if (cells.size() < 4) {
      throw Error::data("line " + std::to_string(line_no) + ": expected at least 4 columns");
    }
    LanguageSpec spec;
    spec.code = cells[0];
    spec.name = cells[1];
    spec.script = cells[2];
    spec.tier = detail::parse_tier(cells[3], line_no);
    if (has_quota_column && cells.size() > 4 && !cells[4].empty()) {
      try {
        spec.quota = std::stoull(cells[4]);
      } catch (const std::exception&) {
        throw Error::data("line " + std::to_string(line_no) + ": bad quota \"" + cells[4] + "\"");
      }
    } else {
      spec.quota = default_quota(spec.tier);
    }
    specs.push_back(std::move(spec));
  }
  return LanguageTable(std::move(specs));  // throws on duplicate code
}

}  // namespace sphinx
