#include "keydyn/table.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "keydyn/detail/textio.hpp"
#include "json.hpp"

namespace keydyn::table {

using features::FeatureGroup;
using features::FeatureInfo;
using features::FeatureKind;

std::ptrdiff_t FeatureTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

FeatureTable FeatureTable::select_columns(
    const std::vector<std::string>& names) const {
  FeatureTable out;
  out.session_ids = session_ids;
  out.labels = labels;
  std::vector<std::size_t> picks;
  for (const std::string& name : names) {
    const std::ptrdiff_t idx = column_index(name);
    if (idx < 0) {
      throw Error(ErrorCode::UnknownFeature, "no such column: " + name);
    }
    picks.push_back(static_cast<std::size_t>(idx));
    out.columns.push_back(columns[static_cast<std::size_t>(idx)]);
  }
  out.rows.reserve(rows.size());
  for (const auto& row : rows) {
    std::vector<std::optional<double>> r;
    r.reserve(picks.size());
    for (std::size_t p : picks) r.push_back(row[p]);
    out.rows.push_back(std::move(r));
  }
  return out;
}

FeatureTable extract_table(const std::vector<events::Session>& sessions,
                           const features::FeatureSchema& schema) {
  FeatureTable t;
  t.columns = schema.features();
  for (const events::Session& s : sessions) {
    features::FeatureVector v = features::extract_features(s, schema);
    t.session_ids.push_back(s.id);
    t.labels.push_back(s.label);
    t.rows.push_back(std::move(v.values));
  }
  return t;
}

void write_csv(const std::filesystem::path& path, const FeatureTable& table,
               const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
  out << "session_id,label";
  for (const FeatureInfo& c : table.columns) out << "," << c.name;
  out << "\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    out << table.session_ids[i] << "," << events::label_name(table.labels[i]);
    for (const auto& cell : table.rows[i]) {
      out << ",";
      if (cell) out << detail::format_double(*cell);
    }
    out << "\n";
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

}  // namespace

FeatureTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  FeatureTable t;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells = split_line(line);
    if (!have_header) {
      if (cells.size() < 2 || cells[0] != "session_id" || cells[1] != "label") {
        throw Error(ErrorCode::MalformedLine,
                    path.string() + ": bad CSV header");
      }
      for (std::size_t i = 2; i < cells.size(); ++i) {
        // group/kind resolved from the sidecar when needed; default here
        t.columns.push_back(
            {cells[i], FeatureGroup::global, FeatureKind::time});
      }
      have_header = true;
      continue;
    }
    if (cells.size() != t.columns.size() + 2) {
      throw Error(ErrorCode::MalformedLine,
                  path.string() + ":" + std::to_string(line_no) +
                      ": wrong cell count");
    }
    t.session_ids.push_back(cells[0]);
    t.labels.push_back(events::label_from_name(cells[1]));
    std::vector<std::optional<double>> row;
    row.reserve(t.columns.size());
    for (std::size_t i = 2; i < cells.size(); ++i) {
      if (cells[i].empty()) {
        row.push_back(std::nullopt);
      } else {
        row.push_back(detail::parse_double(cells[i]));
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (!have_header) {
    throw Error(ErrorCode::MalformedLine, path.string() + ": empty CSV");
  }
  return t;
}

std::string read_csv_config_hash(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  const std::string prefix = "# config_hash=";
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
    if (!line.empty() && line[0] != '#') break;
  }
  return "";
}

const char* group_name(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::global:
      return "global";
    case FeatureGroup::mouse:
      return "mouse";
    case FeatureGroup::special:
      return "special";
    case FeatureGroup::bigram:
      return "bigram";
    case FeatureGroup::trigram:
      return "trigram";
  }
  return "global";
}

const char* kind_name(FeatureKind kind) {
  return kind == FeatureKind::time ? "time" : "frequency";
}

FeatureGroup group_from_name(const std::string& name) {
  if (name == "global") return FeatureGroup::global;
  if (name == "mouse") return FeatureGroup::mouse;
  if (name == "special") return FeatureGroup::special;
  if (name == "bigram") return FeatureGroup::bigram;
  if (name == "trigram") return FeatureGroup::trigram;
  throw Error(ErrorCode::ConfigInvalid, "unknown feature group: " + name);
}

FeatureKind kind_from_name(const std::string& name) {
  if (name == "time") return FeatureKind::time;
  if (name == "frequency") return FeatureKind::frequency;
  throw Error(ErrorCode::ConfigInvalid, "unknown feature kind: " + name);
}

void write_schema_json(const std::filesystem::path& path,
                       const std::vector<FeatureInfo>& columns,
                       const std::string& config_hash) {
  const features::FeatureSchema schema(columns);
  nlohmann::json j;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  nlohmann::json list = nlohmann::json::array();
  for (const FeatureInfo& c : columns) {
    nlohmann::json e;
    e["name"] = c.name;
    e["group"] = group_name(c.group);
    e["kind"] = kind_name(c.kind);
    const std::string display = schema.display_name(c.name);
    if (display != c.name) e["display"] = display;
    list.push_back(e);
  }
  j["features"] = list;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<FeatureInfo> read_schema_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedLine,
                path.string() + ": " + std::string(e.what()));
  }
  std::vector<FeatureInfo> columns;
  for (const auto& e : j.at("features")) {
    columns.push_back({e.at("name").get<std::string>(),
                       group_from_name(e.at("group").get<std::string>()),
                       kind_from_name(e.at("kind").get<std::string>())});
  }
  return columns;
}

}  // namespace keydyn::table
