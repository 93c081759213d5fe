#pragma once

// CSV ingestion and result persistence. Daily files carry (date, return,
// rv) with rv optional; intraday files carry (date, return) rows that are
// aggregated per day. Forecast tables round-trip so evaluation can be
// recomputed from the persisted records alone.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rsvol/errors.hpp"
#include "rsvol/forecast.hpp"
#include "rsvol/model.hpp"
#include "rsvol/realized.hpp"

namespace rsvol {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (const char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("could not parse number '" + s + "' (" + context + ")");
    }
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline Dataset load_daily_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open daily csv: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty daily csv: " + path);
    const auto header = detail::split_csv_line(line);
    int date_col = -1, ret_col = -1, rv_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "date") date_col = int(i);
        else if (header[i] == "return") ret_col = int(i);
        else if (header[i] == "rv") rv_col = int(i);
    }
    if (date_col < 0 || ret_col < 0) {
        throw DataError("daily csv must have 'date' and 'return' columns: " + path);
    }
    Dataset d;
    if (rv_col >= 0) d.x.emplace();
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("daily csv row " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()));
        }
        const std::string& date = cells[date_col];
        if (!d.dates.empty()) {
            if (date == d.dates.back())
                throw DataError("duplicate date " + date + " in " + path);
            if (date < d.dates.back())
                throw DataError("dates not strictly increasing at " + date + " in " + path);
        }
        d.dates.push_back(date);
        d.y.push_back(detail::parse_double(cells[ret_col], "return at " + date));
        if (rv_col >= 0) {
            const double rv = detail::parse_double(cells[rv_col], "rv at " + date);
            if (!(rv > 0.0)) throw DataError("nonpositive rv at date " + date);
            d.x->push_back(std::log(rv));
        }
    }
    if (d.n() == 0) throw DataError("daily csv has no rows: " + path);
    return d;
}

struct IntradaySeries {
    std::vector<std::string> dates;
    std::vector<IntradayDay> days;
};

inline IntradaySeries load_intraday_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open intraday csv: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty intraday csv: " + path);
    const auto header = detail::split_csv_line(line);
    int date_col = -1, ret_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "date") date_col = int(i);
        else if (header[i] == "return") ret_col = int(i);
    }
    if (date_col < 0 || ret_col < 0) {
        throw DataError("intraday csv must have 'date' and 'return' columns: " + path);
    }
    IntradaySeries s;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("intraday csv row " + std::to_string(lineno) + " malformed");
        }
        const std::string& date = cells[date_col];
        const double r = detail::parse_double(cells[ret_col], "return at " + date);
        if (s.dates.empty() || s.dates.back() != date) {
            if (!s.dates.empty() && date < s.dates.back()) {
                throw DataError("intraday dates out of order at " + date);
            }
            s.dates.push_back(date);
            s.days.emplace_back();
        }
        s.days.back().returns.push_back(r);
    }
    return s;
}

inline void write_daily_csv(const std::string& path, const Dataset& d) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write daily csv: " + path);
    out << (d.x ? "date,return,rv\n" : "date,return\n");
    for (std::size_t t = 0; t < d.n(); ++t) {
        out << d.dates[t] << ',' << detail::format_double(d.y[t]);
        if (d.x) out << ',' << detail::format_double(std::exp((*d.x)[t]));
        out << '\n';
    }
}

inline std::string alpha_tag(double alpha) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%g", alpha);
    return buf;
}

// forecasts_<model>.csv: one row per forecast date; everything needed to
// recompute the evaluation tables.
inline void write_forecasts_csv(const std::string& path, const std::vector<ForecastRecord>& recs,
                                const std::vector<double>& alphas,
                                const std::vector<std::string>& proxy_names) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write forecasts csv: " + path);
    out << "date,vol_mean,vol_median";
    for (const double a : alphas) out << ",var_" << alpha_tag(a) << ",es_" << alpha_tag(a);
    out << ",realized_return";
    for (const auto& p : proxy_names) out << ",proxy_" << p;
    out << ",flag\n";
    for (const auto& r : recs) {
        out << r.date << ',' << detail::format_double(r.vol_mean) << ','
            << detail::format_double(r.vol_median);
        for (std::size_t i = 0; i < alphas.size(); ++i) {
            out << ',' << detail::format_double(r.var_alpha[i]) << ','
                << detail::format_double(r.es_alpha[i]);
        }
        out << ',' << detail::format_double(r.realized_return);
        for (const double p : r.realized_proxy) out << ',' << detail::format_double(p);
        out << ',' << (r.flagged ? 1 : 0) << '\n';
    }
}

struct ForecastTable {
    std::vector<ForecastRecord> records;
    std::vector<double> alphas;
    std::vector<std::string> proxy_names;
};

inline ForecastTable read_forecasts_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open forecasts csv: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty forecasts csv: " + path);
    const auto header = detail::split_csv_line(line);
    ForecastTable tab;
    std::vector<int> var_cols, es_cols, proxy_cols;
    int date_col = -1, mean_col = -1, med_col = -1, ret_col = -1, flag_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string& h = header[i];
        if (h == "date") date_col = int(i);
        else if (h == "vol_mean") mean_col = int(i);
        else if (h == "vol_median") med_col = int(i);
        else if (h == "realized_return") ret_col = int(i);
        else if (h == "flag") flag_col = int(i);
        else if (h.rfind("var_", 0) == 0) {
            var_cols.push_back(int(i));
            tab.alphas.push_back(detail::parse_double(h.substr(4), "alpha in header"));
        } else if (h.rfind("es_", 0) == 0) {
            es_cols.push_back(int(i));
        } else if (h.rfind("proxy_", 0) == 0) {
            proxy_cols.push_back(int(i));
            tab.proxy_names.push_back(h.substr(6));
        }
    }
    if (date_col < 0 || mean_col < 0 || med_col < 0 || ret_col < 0 || flag_col < 0 ||
        var_cols.size() != es_cols.size()) {
        throw DataError("forecasts csv header malformed: " + path);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        ForecastRecord r;
        r.date = cells[date_col];
        r.vol_mean = detail::parse_double(cells[mean_col], "vol_mean");
        r.vol_median = detail::parse_double(cells[med_col], "vol_median");
        for (std::size_t k = 0; k < var_cols.size(); ++k) {
            r.var_alpha.push_back(detail::parse_double(cells[var_cols[k]], "var"));
            r.es_alpha.push_back(detail::parse_double(cells[es_cols[k]], "es"));
        }
        r.realized_return = detail::parse_double(cells[ret_col], "realized_return");
        for (const int c : proxy_cols) {
            r.realized_proxy.push_back(detail::parse_double(cells[c], "proxy"));
        }
        r.flagged = cells[flag_col] == "1";
        tab.records.push_back(r);
    }
    return tab;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace rsvol
