#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ffrelay/experiment.hpp"

namespace ffrelay {

std::size_t Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw std::out_of_range("no column named " + name);
}

double cell_number(const Cell& c) {
    if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&c)) return *d;
    return std::nan("");
}

std::string cell_text(const Cell& c) {
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&c)) {
        if (std::isnan(*d)) return "nan";
        if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.12g", *d);
        return buf;
    }
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    return "";
}

namespace experiment {

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

Cell infer_cell(const std::string& text, bool quoted) {
    if (quoted) return text;
    if (text.empty()) return std::monostate{};
    const char* b = text.c_str();
    char* end = nullptr;
    errno = 0;
    const long long i = std::strtoll(b, &end, 10);
    if (*end == '\0' && errno == 0) return static_cast<std::int64_t>(i);
    const double d = std::strtod(b, &end);
    if (*end == '\0') return d;
    return text;
}

std::vector<std::pair<std::string, bool>> split_csv_line(std::istream& in, bool& ok) {
    std::vector<std::pair<std::string, bool>> fields;
    std::string field;
    bool quoted = false, in_quotes = false, any = false;
    char ch;
    ok = false;
    while (in.get(ch)) {
        any = true;
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            in_quotes = quoted = true;
        } else if (ch == ',') {
            fields.emplace_back(field, quoted);
            field.clear();
            quoted = false;
        } else if (ch == '\n') {
            break;
        } else if (ch != '\r') {
            field += ch;
        }
    }
    if (!any) return fields;
    fields.emplace_back(field, quoted);
    ok = true;
    return fields;
}

}  // namespace

Format parse_format(const std::string& name) {
    if (name == "csv") return Format::csv;
    if (name == "json") return Format::json;
    throw ConfigError("format: must be csv or json, got '" + name + "'");
}

std::string to_csv(const Table& t) {
    std::ostringstream out;
    for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << csv_field(t.header[i]);
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            const bool text = std::holds_alternative<std::string>(row[i]);
            std::string s = cell_text(row[i]);
            // text that would read back as a number keeps its quotes
            if (text && !std::holds_alternative<std::string>(infer_cell(s, false))) s = "\"" + s + "\"";
            else s = csv_field(s);
            out << (i ? "," : "") << s;
        }
        out << '\n';
    }
    return out.str();
}

std::string to_json(const Table& t) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < t.header.size(); ++i) {
            const Cell& c = row.at(i);
            if (const auto* v = std::get_if<std::int64_t>(&c)) {
                obj[t.header[i]] = *v;
            } else if (const auto* d = std::get_if<double>(&c)) {
                // same 12 digits as the CSV
                if (std::isfinite(*d)) obj[t.header[i]] = std::strtod(cell_text(c).c_str(), nullptr);
                else obj[t.header[i]] = nullptr;
            } else if (const auto* s = std::get_if<std::string>(&c)) {
                obj[t.header[i]] = *s;
            } else {
                obj[t.header[i]] = nullptr;
            }
        }
        rows.push_back(std::move(obj));
    }
    nlohmann::ordered_json doc;
    doc["columns"] = t.header;
    doc["rows"] = std::move(rows);
    return doc.dump(1) + "\n";
}

Table read_csv(std::istream& in) {
    Table t;
    bool ok = false;
    for (auto& [name, q] : split_csv_line(in, ok)) t.header.push_back(name);
    if (!ok) throw std::runtime_error("read_csv: empty input");
    for (;;) {
        auto fields = split_csv_line(in, ok);
        if (!ok) break;
        if (fields.size() == 1 && fields[0].first.empty()) continue;
        if (fields.size() != t.header.size()) {
            throw std::runtime_error("read_csv: row " + std::to_string(t.rows.size() + 1) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(t.header.size()));
        }
        std::vector<Cell> row;
        for (auto& [text, quoted] : fields) row.push_back(infer_cell(text, quoted));
        t.rows.push_back(std::move(row));
    }
    return t;
}

void emit_report(const Table& t, Format format, const std::string& path) {
    if (t.rows.empty()) throw std::runtime_error("emit_report: no rows");
    const std::string text = format == Format::csv ? to_csv(t) : to_json(t);
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace experiment
}  // namespace ffrelay
