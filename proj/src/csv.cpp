#include "labmatch/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

namespace labmatch {

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_provenance(std::ostream& os, const std::string& config_hash) {
    os << "# labmatch " << kVersion << " config=" << config_hash << '\n';
}

CsvError::CsvError(int line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

void write_outcome_csv(std::ostream& os, const MatchingOutcome& out, const Education& H, const Matrix& X,
                       const std::string& config_hash) {
    write_provenance(os, config_hash);
    os << "worker,education,matched_type,matched_capital,wage";
    for (int k = 0; k < X.cols; ++k) os << ",x" << k + 1;
    os << '\n';
    os.precision(17);
    for (int i = 0; i < out.size(); ++i) {
        os << i << ',' << int(H[i]) << ',' << out.matched_type[i] << ',' << out.matched_capital[i] << ',';
        if (out.wages.empty()) os << "NA";
        else os << out.wages[i];
        for (int k = 0; k < X.cols; ++k) os << ',' << X(i, k);
        os << '\n';
    }
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> f;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            f.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    f.push_back(cur);
    for (auto& s : f) {
        const auto a = s.find_first_not_of(" \t");
        const auto b = s.find_last_not_of(" \t");
        s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
    }
    return f;
}

template <class T>
T parse_number(const std::string& s, int line, const std::string& col) {
    T v{};
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) throw CsvError(line, "column '" + col + "': cannot parse '" + s + "'");
    return v;
}

} // namespace

ObservedData read_outcome_csv(std::istream& is, int n_types) {
    std::string line;
    int lineno = 0;
    std::vector<std::string> header;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        header = split_fields(line);
        break;
    }
    if (header.empty()) throw CsvError(lineno, "no header row");
    std::map<std::string, int> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = static_cast<int>(i);
    std::vector<std::string> missing;
    for (const char* need : {"education", "matched_type", "x1"})
        if (!col.count(need)) missing.push_back(need);
    if (!missing.empty()) {
        std::string m;
        for (const auto& s : missing) m += (m.empty() ? "" : ", ") + s;
        throw CsvError(lineno, "header lacks required column(s): " + m);
    }
    std::vector<int> xcols;
    for (int k = 1; col.count("x" + std::to_string(k)); ++k) xcols.push_back(col["x" + std::to_string(k)]);
    const int d = static_cast<int>(xcols.size());

    ObservedData data;
    std::vector<double> xs;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto f = split_fields(line);
        if (f.size() != header.size())
            throw CsvError(lineno, "expected " + std::to_string(header.size()) + " fields, found " +
                                       std::to_string(f.size()));
        const int e = parse_number<int>(f[col["education"]], lineno, "education");
        if (e != 0 && e != 1) throw CsvError(lineno, "education must be 0 or 1");
        const int m = parse_number<int>(f[col["matched_type"]], lineno, "matched_type");
        if (m < 0 || m >= n_types)
            throw CsvError(lineno, "matched_type " + std::to_string(m) + " outside 0.." + std::to_string(n_types - 1));
        data.H.push_back(static_cast<std::uint8_t>(e));
        data.matched_type.push_back(m);
        for (int k = 0; k < d; ++k) xs.push_back(parse_number<double>(f[xcols[k]], lineno, header[xcols[k]]));
    }
    if (data.H.empty()) throw CsvError(lineno, "no data rows");
    data.X = Matrix(data.size(), d);
    data.X.data = std::move(xs);
    return data;
}

ObservedData read_outcome_csv(const std::string& path, int n_types) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open data file '" + path + "'");
    return read_outcome_csv(in, n_types);
}

} // namespace labmatch
