#include "multcorr/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "multcorr/errors.hpp"

namespace multcorr {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw InvariantError("double formatting failed");
    return std::string(buf, end);
}

std::string fmt(uint64_t v) { return std::to_string(v); }
std::string fmt(int64_t v) { return std::to_string(v); }

CsvTable::CsvTable(std::string name, std::vector<std::string> columns)
    : name_(std::move(name)), columns_(std::move(columns)) {}

void CsvTable::add(std::vector<std::string> cells) {
    if (cells.size() != columns_.size())
        throw InvariantError("csv " + name_ + ": row has " + std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(columns_.size()));
    for (const auto& c : cells)
        if (c.find_first_of(",\n\"") != std::string::npos) throw InvariantError("csv cell needs quoting: " + c);
    rows_.push_back(std::move(cells));
}

std::string CsvTable::render(const std::string& provenance) const {
    std::string out = "# " + provenance + "\n";
    auto line = [&](const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(columns_);
    for (const auto& r : rows_) line(r);
    return out;
}

void CsvTable::write(const std::string& path, const std::string& provenance) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << render(provenance);
    if (!f) throw Error("write failed: " + path);
}

}  // namespace multcorr
