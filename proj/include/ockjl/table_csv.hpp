// table_csv.hpp
//
// Feature table CSV: `flow_id[,label],f0,...,f{D-1}`. The label column is
// optional and detected from the header.

#ifndef OCKJL_TABLE_CSV_HPP
#define OCKJL_TABLE_CSV_HPP

#include "ockjl/common.hpp"
#include "ockjl/pcap.hpp"

#include <charconv>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace ockjl {

struct FeatureTable {
    std::vector<std::int64_t> ids;
    std::optional<std::vector<int>> labels;
    Matrix values;
};

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline std::string write_feature_csv(const FeatureTable &t) {
    std::ostringstream os;
    os << "flow_id";
    if (t.labels) {
        os << ",label";
    }
    for (Index j = 0; j < t.values.cols(); ++j) {
        os << ",f" << j;
    }
    os << '\n';
    for (Index i = 0; i < t.values.rows(); ++i) {
        os << (i < static_cast<Index>(t.ids.size()) ? t.ids[static_cast<std::size_t>(i)] : i);
        if (t.labels) {
            os << ',' << (*t.labels)[static_cast<std::size_t>(i)];
        }
        for (Index j = 0; j < t.values.cols(); ++j) {
            os << ',' << format_double(t.values(i, j));
        }
        os << '\n';
    }
    return os.str();
}

inline FeatureTable parse_feature_csv(std::string_view text) {
    auto lines = detail::split_lines(text);
    if (lines.empty() || lines.front().empty()) {
        throw ParseError{"feature csv: missing header"};
    }
    auto header = detail::split_fields(lines.front());
    if (header.front() != "flow_id") {
        throw ParseError{"feature csv: line 1: first column must be flow_id"};
    }
    const bool has_label = header.size() > 1 && header[1] == "label";
    const std::size_t first_feature = has_label ? 2 : 1;
    const std::size_t dim = header.size() - first_feature;

    FeatureTable t;
    if (has_label) {
        t.labels.emplace();
    }
    std::vector<double> flat;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            continue;
        }
        auto where = "feature csv: line " + std::to_string(i + 1) + ": ";
        auto f = detail::split_fields(lines[i]);
        if (f.size() != header.size()) {
            throw ParseError{where + "expected " + std::to_string(header.size()) + " fields"};
        }
        std::int64_t id = 0;
        if (!detail::parse_integer(f[0], id)) {
            throw ParseError{where + "bad flow_id"};
        }
        t.ids.push_back(id);
        if (has_label) {
            int label = 0;
            if (!detail::parse_integer(f[1], label)) {
                throw ParseError{where + "bad label"};
            }
            t.labels->push_back(label);
        }
        for (std::size_t j = first_feature; j < f.size(); ++j) {
            double v = 0.0;
            auto s = f[j];
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) {
                throw ParseError{where + "bad value in column " + std::to_string(j + 1)};
            }
            flat.push_back(v);
        }
    }
    t.values.resize(static_cast<Index>(t.ids.size()), static_cast<Index>(dim));
    for (Index i = 0; i < t.values.rows(); ++i) {
        for (Index j = 0; j < t.values.cols(); ++j) {
            t.values(i, j) = flat[static_cast<std::size_t>(i * t.values.cols() + j)];
        }
    }
    return t;
}

} // namespace ockjl

#endif // OCKJL_TABLE_CSV_HPP
