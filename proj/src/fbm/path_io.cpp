#include "rbn/fbm.hpp"

#include <array>
#include <algorithm>
#include <cstdio>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace rbn::fbm {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw DomainError("read_csv: malformed number '" + s + "'");
    return v;
}

constexpr std::array<char, 8> kMagic{'R', 'B', 'N', 'F', 'B', 'M', '0', '1'};

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw DomainError("read_binary: truncated input");
    return v;
}

}  // namespace

void write_csv(std::ostream& os, const FbmPath& path) {
    os << "# kind=FbmPath h=" << fmt(path.h) << " seed=" << path.seed << " n_steps=" << path.grid.n_steps
       << " horizon=" << fmt(path.grid.horizon) << " dim=" << path.dim << " normalization=unit_variance\n";
    os << "t";
    for (std::size_t k = 0; k < path.dim; ++k) os << ",x_" << (k + 1);
    os << '\n';
    for (std::size_t i = 0; i < path.grid.size(); ++i) {
        os << fmt(path.grid.t(i));
        for (std::size_t k = 0; k < path.dim; ++k) os << ',' << fmt(path(i, k));
        os << '\n';
    }
}

FbmPath read_csv(std::istream& is) {
    std::string line;
    std::map<std::string, std::string> meta;
    while (std::getline(is, line) && !line.empty() && line[0] == '#') {
        std::istringstream ls(line.substr(1));
        std::string tok;
        while (ls >> tok) {
            const auto eq = tok.find('=');
            if (eq != std::string::npos) meta[tok.substr(0, eq)] = tok.substr(eq + 1);
        }
    }
    for (const char* key : {"h", "seed", "n_steps"})
        if (!meta.count(key)) throw DomainError(std::string("read_csv: header lacks ") + key);
    if (line.rfind("t", 0) != 0) throw DomainError("read_csv: missing column header");
    FbmPath p;
    const std::size_t n = std::stoull(meta["n_steps"]);
    const double horizon = meta.count("horizon") ? parse_double(meta["horizon"]) : 1.0;
    p.grid = TimeGrid(horizon, n);
    p.h = parse_double(meta["h"]);
    p.seed = std::stoull(meta["seed"]);
    p.dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    if (p.dim == 0) throw DomainError("read_csv: no coordinate columns");
    p.values.reserve(p.grid.size() * p.dim);
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');  // t is implied by the grid
        for (std::size_t k = 0; k < p.dim; ++k) {
            if (!std::getline(ls, cell, ',')) throw DomainError("read_csv: short row");
            p.values.push_back(parse_double(cell));
        }
        ++rows;
    }
    if (rows != p.grid.size()) throw DomainError("read_csv: row count does not match n_steps");
    return p;
}

void write_binary(std::ostream& os, const FbmPath& path) {
    os.write(kMagic.data(), kMagic.size());
    put<double>(os, path.h);
    put<std::uint64_t>(os, path.seed);
    put<std::uint64_t>(os, path.grid.n_steps);
    put<double>(os, path.grid.horizon);
    put<std::uint64_t>(os, path.dim);
    os.write(reinterpret_cast<const char*>(path.values.data()),
             static_cast<std::streamsize>(path.values.size() * sizeof(double)));
}

FbmPath read_binary(std::istream& is) {
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) throw DomainError("read_binary: not an FbmPath cache");
    FbmPath p;
    p.h = get<double>(is);
    p.seed = get<std::uint64_t>(is);
    const auto n = get<std::uint64_t>(is);
    const double horizon = get<double>(is);
    p.grid = TimeGrid(horizon, n);
    p.dim = get<std::uint64_t>(is);
    p.values.resize(p.grid.size() * p.dim);
    is.read(reinterpret_cast<char*>(p.values.data()), static_cast<std::streamsize>(p.values.size() * sizeof(double)));
    if (!is) throw DomainError("read_binary: truncated values");
    return p;
}

}  // namespace rbn::fbm
