#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "keydyn/events.hpp"
#include "keydyn/features.hpp"

namespace keydyn::table {

// A feature matrix with named columns. Cells are optional: an absent cell
// means the feature's key/n-gram never occurred in that session.
struct FeatureTable {
  std::vector<features::FeatureInfo> columns;
  std::vector<std::string> session_ids;
  std::vector<events::Label> labels;
  std::vector<std::vector<std::optional<double>>> rows;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return columns.size(); }
  std::ptrdiff_t column_index(const std::string& name) const;

  // New table keeping only the named columns, in the given order.
  FeatureTable select_columns(const std::vector<std::string>& names) const;
};

FeatureTable extract_table(const std::vector<events::Session>& sessions,
                           const features::FeatureSchema& schema);

// CSV layout: session_id,label,<feature...> with absent cells empty.
// Lines starting with '#' are metadata (config hash) and are skipped on
// read.
void write_csv(const std::filesystem::path& path, const FeatureTable& table,
               const std::string& config_hash = "");
FeatureTable read_csv(const std::filesystem::path& path);
std::string read_csv_config_hash(const std::filesystem::path& path);

// JSON sidecar with name/group/kind (and display alias) per feature.
void write_schema_json(const std::filesystem::path& path,
                       const std::vector<features::FeatureInfo>& columns,
                       const std::string& config_hash = "");
std::vector<features::FeatureInfo> read_schema_json(
    const std::filesystem::path& path);

const char* group_name(features::FeatureGroup group);
const char* kind_name(features::FeatureKind kind);
features::FeatureGroup group_from_name(const std::string& name);
features::FeatureKind kind_from_name(const std::string& name);

}  // namespace keydyn::table
