#pragma once

#include <cstdio>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace mqbqr::csv {

inline constexpr int kDefaultPrecision = 9;

inline std::string number(double v, int precision = kDefaultPrecision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

// RFC 4180 field quoting.
inline std::string field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

class Writer {
public:
    explicit Writer(std::ostream& os, int precision = kDefaultPrecision) : os_(os), precision_(precision) {}

    Writer& header(std::initializer_list<std::string_view> names) {
        for (auto n : names) cell(n);
        return end_row();
    }
    Writer& cell(std::string_view s) {
        sep();
        os_ << field(s);
        return *this;
    }
    Writer& cell(const char* s) { return cell(std::string_view(s)); }
    Writer& cell(const std::string& s) { return cell(std::string_view(s)); }
    Writer& cell(double v) {
        sep();
        os_ << number(v, precision_);
        return *this;
    }
    Writer& cell(int v) {
        sep();
        os_ << v;
        return *this;
    }
    Writer& cell(long v) {
        sep();
        os_ << v;
        return *this;
    }
    Writer& end_row() {
        os_ << '\n';
        first_ = true;
        return *this;
    }
    int precision() const { return precision_; }

private:
    void sep() {
        if (!first_) os_ << ',';
        first_ = false;
    }
    std::ostream& os_;
    int precision_;
    bool first_ = true;
};

// Minimal reader for files produced by Writer (handles quoted fields).
inline std::vector<std::vector<std::string>> parse(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(cur));
            cur.clear();
        } else if (c == '\n') {
            row.push_back(std::move(cur));
            cur.clear();
            rows.push_back(std::move(row));
            row.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (!cur.empty() || !row.empty()) {
        row.push_back(std::move(cur));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace mqbqr::csv
