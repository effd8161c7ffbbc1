#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace clpt {

/// Round-trip decimal form (17 significant digits).
std::string fmt(double v);

/// In-memory CSV table; rendering is deterministic so outputs can be hashed.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header = {}) : header_(std::move(header)) {}

    void add_row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }
    void add_numeric_row(const std::vector<double>& values);
    std::string render() const;
    size_t rows() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);
/// Lowercase hex SHA-256 digest.
std::string sha256_hex(const std::string& data);

}  // namespace clpt
