#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qfhs/error.hpp"
#include "qfhs/format.hpp"

namespace qfhs {

/// Calendar date (proleptic Gregorian), ISO-8601 text form.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    [[nodiscard]] std::string iso() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    /// Parses YYYY-MM-DD; returns nullopt on any malformation.
    static std::optional<Date> parse(std::string_view s) {
        s = trim(s);
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
        auto num = [&](std::size_t pos, std::size_t len, int& out) {
            auto r = std::from_chars(s.data() + pos, s.data() + pos + len, out);
            return r.ec == std::errc() && r.ptr == s.data() + pos + len;
        };
        Date d;
        if (!num(0, 4, d.year) || !num(5, 2, d.month) || !num(8, 2, d.day)) return std::nullopt;
        if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
            return std::nullopt;
        return d;
    }

    static int days_in_month(int y, int m) {
        static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        return (m == 2 && leap) ? 29 : days[m - 1];
    }

    /// Next calendar date; used to lay out synthetic series.
    [[nodiscard]] Date next() const {
        Date d = *this;
        if (++d.day > days_in_month(d.year, d.month)) {
            d.day = 1;
            if (++d.month > 12) {
                d.month = 1;
                ++d.year;
            }
        }
        return d;
    }
};

/// Daily OHLC bars; close is the adjusted close.
struct OhlcSeries {
    std::vector<Date> dates;
    std::vector<double> open, high, low, close;

    [[nodiscard]] std::size_t size() const noexcept { return dates.size(); }
};

/// Aligned percent log-returns and (optionally) intra-day log ranges.
struct MarketSeries {
    std::vector<Date> dates;
    std::vector<double> returns;
    std::vector<double> realized;        ///< empty when no realized measure is attached
    std::vector<std::size_t> degenerate; ///< indices where the range was zero (high == low)

    [[nodiscard]] std::size_t size() const noexcept { return returns.size(); }
    [[nodiscard]] bool has_realized() const noexcept { return !realized.empty(); }

    /// Contiguous sub-series [first, first + count).
    [[nodiscard]] MarketSeries slice(std::size_t first, std::size_t count) const {
        if (first + count > size()) throw LengthError("slice beyond the end of the series");
        MarketSeries out;
        auto b = static_cast<std::ptrdiff_t>(first);
        auto e = static_cast<std::ptrdiff_t>(first + count);
        out.dates.assign(dates.begin() + b, dates.begin() + e);
        out.returns.assign(returns.begin() + b, returns.begin() + e);
        if (has_realized()) out.realized.assign(realized.begin() + b, realized.begin() + e);
        for (std::size_t i : degenerate)
            if (i >= first && i < first + count) out.degenerate.push_back(i - first);
        return out;
    }

    /// Replaces zero ranges with the smallest positive range of the series.
    void floor_degenerate_realized() {
        if (degenerate.empty() || !has_realized()) return;
        double floor = 0.0;
        for (double x : realized)
            if (x > 0.0 && (floor == 0.0 || x < floor)) floor = x;
        if (floor == 0.0) throw ValidationError("realized measure is zero on every day");
        for (std::size_t i : degenerate) realized[i] = floor;
        degenerate.clear();
    }
};

struct SampleSplit {
    MarketSeries in_sample;
    MarketSeries out_of_sample;
    std::size_t horizon = 1;
    bool empty_out_of_sample = false;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace detail

/// Reads the `date,open,high,low,close` CSV schema. Rows are numbered from 1
/// (first data row after the header) in diagnostics.
[[nodiscard]] inline OhlcSeries load_ohlc(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty OHLC stream");
    {
        auto header = detail::split_csv_line(line);
        static constexpr std::string_view expected[] = {"date", "open", "high", "low", "close"};
        if (header.size() != 5) throw ParseError("OHLC header must be date,open,high,low,close");
        for (std::size_t i = 0; i < 5; ++i)
            if (detail::lower(header[i]) != expected[i])
                throw ParseError("OHLC header must be date,open,high,low,close");
    }
    OhlcSeries s;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const std::string where = "row " + std::to_string(row);
        auto cells = detail::split_csv_line(line);
        if (cells.size() != 5) throw ParseError(where + ": expected 5 fields");
        auto date = Date::parse(cells[0]);
        if (!date) throw ParseError(where + ": bad date '" + std::string(cells[0]) + "'");
        if (!s.dates.empty() && !(s.dates.back() < *date))
            throw ParseError(where + ": dates must be strictly increasing");
        double v[4];
        for (int k = 0; k < 4; ++k) {
            auto p = detail::parse_double(cells[static_cast<std::size_t>(k) + 1]);
            if (!p || !std::isfinite(*p)) throw ParseError(where + ": malformed price");
            if (*p <= 0.0) throw ValidationError(where + ": non-positive price");
            v[k] = *p;
        }
        const double open = v[0], high = v[1], low = v[2], close = v[3];
        if (high < low) throw ValidationError(where + ": high < low");
        if (high < std::max(open, close) || low > std::min(open, close))
            throw ValidationError(where + ": open/close outside the [low, high] range");
        s.dates.push_back(*date);
        s.open.push_back(open);
        s.high.push_back(high);
        s.low.push_back(low);
        s.close.push_back(close);
    }
    return s;
}

[[nodiscard]] inline OhlcSeries load_ohlc_text(const std::string& csv) {
    std::istringstream in(csv);
    return load_ohlc(in);
}

/// r_t = scale (ln C_t - ln C_{t-1}); X_t = realized_scale (ln H_t - ln L_t).
[[nodiscard]] inline MarketSeries to_market_series(const OhlcSeries& ohlc, double return_scale = 100.0,
                                                   double realized_scale = 1.0) {
    if (ohlc.size() < 2) throw LengthError("need at least two OHLC rows to form a return");
    if (!(return_scale > 0.0)) throw InvalidParameter("return_scale must be positive");
    if (!(realized_scale > 0.0)) throw InvalidParameter("realized_scale must be positive");
    MarketSeries m;
    const std::size_t n = ohlc.size() - 1;
    m.dates.reserve(n);
    m.returns.reserve(n);
    m.realized.reserve(n);
    for (std::size_t t = 1; t < ohlc.size(); ++t) {
        m.dates.push_back(ohlc.dates[t]);
        m.returns.push_back(return_scale * (std::log(ohlc.close[t]) - std::log(ohlc.close[t - 1])));
        const double range = realized_scale * (std::log(ohlc.high[t]) - std::log(ohlc.low[t]));
        if (range == 0.0) m.degenerate.push_back(t - 1);
        m.realized.push_back(range);
    }
    return m;
}

/// Sums consecutive blocks of h returns; the trailing partial block is dropped
/// and each block carries its last date. The realized measure is not carried.
[[nodiscard]] inline MarketSeries aggregate_nonoverlapping(const MarketSeries& s, std::size_t h) {
    if (h == 0) throw InvalidParameter("aggregation horizon must be at least 1");
    if (h == 1) return s;
    MarketSeries out;
    const std::size_t blocks = s.size() / h;
    for (std::size_t b = 0; b < blocks; ++b) {
        double sum = 0.0;
        for (std::size_t k = 0; k < h; ++k) sum += s.returns[b * h + k];
        out.returns.push_back(sum);
        out.dates.push_back(s.dates[b * h + h - 1]);
    }
    return out;
}

/// Splits at an observation count: [0, n_in) and the remainder, truncated to
/// whole h-day blocks.
[[nodiscard]] inline SampleSplit split_at(const MarketSeries& s, std::size_t n_in, std::size_t h) {
    if (h == 0) throw InvalidParameter("horizon must be at least 1");
    if (n_in == 0 || n_in > s.size()) throw DomainError("split boundary outside the series");
    SampleSplit out;
    out.horizon = h;
    out.in_sample = s.slice(0, n_in);
    const std::size_t rest = s.size() - n_in;
    out.out_of_sample = s.slice(n_in, (rest / h) * h);
    out.empty_out_of_sample = out.out_of_sample.size() == 0;
    return out;
}

/// In-sample holds every observation dated on or before `boundary`.
[[nodiscard]] inline SampleSplit split(const MarketSeries& s, const Date& boundary, std::size_t h) {
    if (s.size() == 0 || boundary < s.dates.front() || s.dates.back() < boundary)
        throw DomainError("split boundary " + boundary.iso() + " outside the series date range");
    const auto it = std::upper_bound(s.dates.begin(), s.dates.end(), boundary);
    return split_at(s, static_cast<std::size_t>(it - s.dates.begin()), h);
}

/// Writes `date,return,realized`; realized is blank when absent.
inline void write_market_series(std::ostream& out, const MarketSeries& s) {
    out << "date,return,realized\n";
    for (std::size_t t = 0; t < s.size(); ++t) {
        out << s.dates[t].iso() << ',' << format_double(s.returns[t], 15) << ',';
        if (s.has_realized()) out << format_double(s.realized[t], 15);
        out << '\n';
    }
}

[[nodiscard]] inline MarketSeries load_market_series(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty series stream");
    auto header = detail::split_csv_line(line);
    if (header.size() < 2 || detail::lower(header[0]) != "date" || detail::lower(header[1]) != "return")
        throw ParseError("series header must be date,return[,realized]");
    const bool with_realized = header.size() >= 3 && detail::lower(header[2]) == "realized";
    MarketSeries m;
    std::size_t row = 0;
    bool any_realized = false;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const std::string where = "row " + std::to_string(row);
        auto cells = detail::split_csv_line(line);
        auto date = Date::parse(cells[0]);
        if (!date) throw ParseError(where + ": bad date");
        if (!m.dates.empty() && !(m.dates.back() < *date))
            throw ParseError(where + ": dates must be strictly increasing");
        if (cells.size() < 2) throw ParseError(where + ": missing return");
        auto r = detail::parse_double(cells[1]);
        if (!r) throw ParseError(where + ": malformed return");
        m.dates.push_back(*date);
        m.returns.push_back(*r);
        if (with_realized && cells.size() >= 3 && !cells[2].empty()) {
            auto x = detail::parse_double(cells[2]);
            if (!x || *x < 0.0) throw ParseError(where + ": malformed realized measure");
            if (*x == 0.0) m.degenerate.push_back(m.size() - 1);
            m.realized.push_back(*x);
            any_realized = true;
        } else if (any_realized) {
            throw ParseError(where + ": realized measure missing");
        }
    }
    if (any_realized && m.realized.size() != m.returns.size())
        throw ParseError("realized column present only on some rows");
    return m;
}

}  // namespace qfhs
