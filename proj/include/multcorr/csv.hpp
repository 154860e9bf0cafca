#pragma once

#include <string>
#include <vector>

namespace multcorr {

// Shortest round-trip text for a double; "inf", "-inf", "nan" for non-finite values.
std::string fmt(double v);
std::string fmt(uint64_t v);
std::string fmt(int64_t v);
inline std::string fmt(int v) { return fmt(int64_t(v)); }
inline std::string fmt(unsigned v) { return fmt(uint64_t(v)); }
inline std::string fmt(bool v) { return v ? "1" : "0"; }
inline std::string fmt(const std::string& s) { return s; }
inline std::string fmt(const char* s) { return s; }

class CsvTable {
public:
    CsvTable(std::string name, std::vector<std::string> columns);

    const std::string& name() const { return name_; }
    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }

    template <class... Ts>
    void row(const Ts&... cells) {
        add({fmt(cells)...});
    }
    void add(std::vector<std::string> cells);

    // First line: "# <provenance>", second: the column header.
    std::string render(const std::string& provenance) const;
    void write(const std::string& path, const std::string& provenance) const;

private:
    std::string name_;
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace multcorr
