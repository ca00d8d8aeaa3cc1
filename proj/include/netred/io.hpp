#pragma once

// File formats: Matrix Market (coordinate/array, real/integer), edge-list
// CSV, clustering and report JSON, DOT, dissimilarity CSV. Vertex ids are
// 1-based in every file and 0-based in memory.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "netred/error.hpp"
#include "netred/errors.hpp"
#include "netred/graph.hpp"
#include "netred/reduction.hpp"

namespace netred::io {

using Json = nlohmann::json;

/// Shortest text that reads back to the same double.
inline std::string format_double(double x) {
    if (x == 0.0) return "0";
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline double parse_number(const std::string& tok, const std::string& file, std::size_t line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        throw ParseError(file, line, "expected a number, got '" + tok + "'");
    }
    if (used != tok.size()) throw ParseError(file, line, "expected a number, got '" + tok + "'");
    if (!std::isfinite(v)) throw ParseError(file, line, "non-finite value '" + tok + "'");
    return v;
}

inline long parse_index(const std::string& tok, const std::string& file, std::size_t line) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(tok, &used);
    } catch (const std::exception&) {
        throw ParseError(file, line, "expected an integer, got '" + tok + "'");
    }
    if (used != tok.size()) throw ParseError(file, line, "expected an integer, got '" + tok + "'");
    return v;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path);
    return out;
}

}  // namespace detail

inline Matrix read_matrix_market(std::istream& in, const std::string& name = "<stream>") {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError(name, 1, "empty file");
    ++lineno;
    std::istringstream header(line);
    std::string banner, object, format, field, symmetry;
    header >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || detail::lower(object) != "matrix")
        throw ParseError(name, lineno, "missing '%%MatrixMarket matrix' header");
    format = detail::lower(format);
    field = detail::lower(field);
    symmetry = detail::lower(symmetry);
    if (format != "coordinate" && format != "array") throw ParseError(name, lineno, "unsupported format '" + format + "'");
    if (field != "real" && field != "integer" && field != "double")
        throw ParseError(name, lineno, "unsupported field '" + field + "'");
    if (symmetry != "general" && symmetry != "symmetric")
        throw ParseError(name, lineno, "unsupported symmetry '" + symmetry + "'");
    const bool symmetric = symmetry == "symmetric";

    auto next_data_line = [&](std::string& out) {
        while (std::getline(in, out)) {
            ++lineno;
            const std::string t = detail::trim(out);
            if (t.empty() || t[0] == '%') continue;
            out = t;
            return true;
        }
        return false;
    };
    auto tokens = [](const std::string& s) {
        std::istringstream is(s);
        std::vector<std::string> t;
        for (std::string w; is >> w;) t.push_back(w);
        return t;
    };

    if (!next_data_line(line)) throw ParseError(name, lineno + 1, "missing size line");
    const auto size = tokens(line);
    if (size.size() != (format == "coordinate" ? 3u : 2u)) throw ParseError(name, lineno, "malformed size line");
    const long rows = detail::parse_index(size[0], name, lineno);
    const long cols = detail::parse_index(size[1], name, lineno);
    if (rows < 0 || cols < 0) throw ParseError(name, lineno, "negative dimension");
    if (symmetric && rows != cols) throw ParseError(name, lineno, "symmetric matrix must be square");
    Matrix m = Matrix::Zero(rows, cols);

    if (format == "coordinate") {
        const long nnz = detail::parse_index(size[2], name, lineno);
        if (nnz < 0) throw ParseError(name, lineno, "negative entry count");
        std::set<std::pair<long, long>> seen;
        for (long k = 0; k < nnz; ++k) {
            if (!next_data_line(line)) throw ParseError(name, lineno + 1, "expected " + std::to_string(nnz) + " entries");
            const auto t = tokens(line);
            if (t.size() != 3) throw ParseError(name, lineno, "expected 'row col value'");
            const long i = detail::parse_index(t[0], name, lineno);
            const long j = detail::parse_index(t[1], name, lineno);
            const double v = detail::parse_number(t[2], name, lineno);
            if (i < 1 || i > rows || j < 1 || j > cols) throw ParseError(name, lineno, "index out of range");
            if (!seen.emplace(i, j).second) throw ParseError(name, lineno, "duplicate entry");
            if (symmetric && j > i) throw ParseError(name, lineno, "symmetric storage expects the lower triangle");
            m(i - 1, j - 1) = v;
            if (symmetric) m(j - 1, i - 1) = v;
        }
    } else {
        for (long j = 0; j < cols; ++j)
            for (long i = symmetric ? j : 0; i < rows; ++i) {
                if (!next_data_line(line)) throw ParseError(name, lineno + 1, "too few values");
                const auto t = tokens(line);
                if (t.size() != 1) throw ParseError(name, lineno, "expected one value per line");
                m(i, j) = detail::parse_number(t[0], name, lineno);
                if (symmetric) m(j, i) = m(i, j);
            }
    }
    if (next_data_line(line)) throw ParseError(name, lineno, "unexpected trailing data");
    return m;
}

inline Matrix read_matrix_market(const std::string& path) {
    auto in = detail::open_in(path);
    return read_matrix_market(in, path);
}

/// Coordinate real general, nonzeros in column-major order, "%.17g".
inline void write_matrix_market(std::ostream& out, const Matrix& m) {
    long nnz = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (m(i, j) != 0.0) ++nnz;
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.rows() << ' ' << m.cols() << ' ' << nnz << '\n';
    char buf[64];
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (m(i, j) != 0.0) {
                std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
                out << i + 1 << ' ' << j + 1 << ' ' << buf << '\n';
            }
}

inline void write_matrix_market(const std::string& path, const Matrix& m) {
    auto out = detail::open_out(path);
    write_matrix_market(out, m);
}

/// Header `src,dst,weight`, one flow per line. The vertex count is the
/// largest id unless `n` is given.
inline DiGraph read_edge_csv(std::istream& in, const std::string& name = "<stream>", int n = 0) {
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    std::vector<Flow> flows;
    long largest = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (!header) {
            std::string h;
            for (char c : t)
                if (c != ' ' && c != '\t') h += c;
            if (detail::lower(h) != "src,dst,weight") throw ParseError(name, lineno, "expected header 'src,dst,weight'");
            header = true;
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(t);
        for (std::string f; std::getline(ss, f, ',');) fields.push_back(detail::trim(f));
        if (fields.size() != 3) throw ParseError(name, lineno, "expected three comma-separated fields");
        const long s = detail::parse_index(fields[0], name, lineno);
        const long d = detail::parse_index(fields[1], name, lineno);
        const double w = detail::parse_number(fields[2], name, lineno);
        if (s < 1 || d < 1) throw ParseError(name, lineno, "vertex ids are 1-based");
        largest = std::max({largest, s, d});
        flows.push_back({static_cast<int>(s - 1), static_cast<int>(d - 1), w});
    }
    if (!header) throw ParseError(name, lineno + 1, "empty file");
    if (n > 0 && largest > n) throw ParseError(name, lineno, "vertex id exceeds the declared vertex count");
    try {
        return DiGraph(n > 0 ? n : static_cast<int>(largest), std::move(flows));
    } catch (const InvalidGraph& e) {
        throw ParseError(name, lineno, e.what());
    }
}

inline DiGraph read_edge_csv(const std::string& path, int n = 0) {
    auto in = detail::open_in(path);
    return read_edge_csv(in, path, n);
}

inline void write_edge_csv(std::ostream& out, const DiGraph& g) {
    out << "src,dst,weight\n";
    for (const Flow& f : g.flows()) out << f.source + 1 << ',' << f.target + 1 << ',' << format_double(f.weight) << '\n';
}

/// Ingests a Laplacian from Matrix Market; row sums must vanish to
/// 1e-9 * max|L|.
inline Matrix read_laplacian(const std::string& path) {
    const Matrix lap = read_matrix_market(path);
    try {
        DiGraph::from_laplacian(lap);
    } catch (const Error& e) {
        throw ParseError(path, 0, e.what());
    }
    return lap;
}

inline Json clustering_to_json(const Clustering& c) {
    Json cells = Json::array();
    for (const auto& cell : c.cells()) {
        Json ids = Json::array();
        for (int v : cell) ids.push_back(v + 1);
        cells.push_back(ids);
    }
    return Json{{"cells", cells}, {"order", c.order()}};
}

inline Clustering clustering_from_json(const Json& j, int n, const std::string& name = "<json>") {
    if (!j.is_object() || !j.contains("cells") || !j["cells"].is_array())
        throw ParseError(name, 0, "expected an object with a 'cells' array");
    std::vector<std::vector<int>> cells;
    for (const auto& cell : j["cells"]) {
        if (!cell.is_array()) throw ParseError(name, 0, "each cell must be an array of vertex ids");
        std::vector<int> ids;
        for (const auto& v : cell) {
            if (!v.is_number_integer()) throw ParseError(name, 0, "vertex ids must be integers");
            ids.push_back(v.get<int>() - 1);
        }
        cells.push_back(std::move(ids));
    }
    if (j.contains("order") && (!j["order"].is_number_integer() || j["order"].get<std::size_t>() != cells.size()))
        throw ParseError(name, 0, "'order' does not match the number of cells");
    try {
        return Clustering(n, std::move(cells));
    } catch (const InvalidArgument& e) {
        throw ParseError(name, 0, e.what());
    }
}

inline Clustering read_clustering(const std::string& path, int n) {
    auto in = detail::open_in(path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ParseError(path, 0, e.what());
    }
    return clustering_from_json(j, n, path);
}

inline Json report_to_json(const ErrorReport& r) {
    Json j;
    j["bounded"] = r.bounded;
    j["h2_error"] = r.h2_error ? Json(*r.h2_error) : Json(nullptr);
    j["dual_h2_error"] = r.dual_h2_error ? Json(*r.dual_h2_error) : Json(nullptr);
    j["method"] = r.method;
    j["residuals"] = Json(r.residuals);
    j["tolerances"] = Json(r.tolerances);
    j["dual_agrees"] = r.dual_agrees;
    return j;
}

/// Sorted keys, two-space indent, trailing newline.
inline void write_json(std::ostream& out, const Json& j) { out << j.dump(2) << '\n'; }

inline void write_json(const std::string& path, const Json& j) {
    auto out = detail::open_out(path);
    write_json(out, j);
}

/// One line per unordered pair; unclusterable pairs carry "inf".
inline void write_dissimilarity_csv(std::ostream& out, const DissimilarityMatrix& d) {
    out << "i,j,input,output,dissimilarity\n";
    auto cell = [](double v) { return std::isinf(v) ? std::string("inf") : format_double(v); };
    for (int i = 0; i < d.n(); ++i)
        for (int j = i + 1; j < d.n(); ++j)
            out << i + 1 << ',' << j + 1 << ',' << cell(d.input(i, j)) << ',' << cell(d.output(i, j)) << ','
                << cell(d.value(i, j)) << '\n';
}

/// Edge weight as label; cell membership (if any) as a fill color index.
inline void write_dot(std::ostream& out, const DiGraph& g, const Clustering* cells = nullptr,
                      const std::string& name = "network") {
    constexpr int palette = 12;
    out << "digraph " << name << " {\n";
    out << "  node [shape=circle, style=filled, colorscheme=set312];\n";
    for (int v = 0; v < g.n(); ++v) {
        out << "  " << v + 1 << " [label=\"" << v + 1 << "\"";
        if (cells) out << ", fillcolor=" << cells->cell_of(v) % palette + 1;
        else out << ", fillcolor=white";
        out << "];\n";
    }
    for (const Flow& f : g.flows())
        out << "  " << f.source + 1 << " -> " << f.target + 1 << " [label=\"" << format_double(f.weight) << "\"];\n";
    out << "}\n";
}

}  // namespace netred::io
