#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>

#include "qfhs/timeseries.hpp"

using namespace qfhs;
using Catch::Approx;

namespace {

const char* kThreeRows =
    "date,open,high,low,close\n"
    "2020-01-02,100,101,99,100\n"
    "2020-01-03,100,111,99,110\n"
    "2020-01-06,110,112,108,111\n";

MarketSeries series_of(std::vector<double> r) {
    MarketSeries s;
    Date d{2020, 1, 1};
    for (double x : r) {
        s.dates.push_back(d);
        s.returns.push_back(x);
        d = d.next();
    }
    return s;
}

}  // namespace

TEST_CASE("well formed OHLC is ingested") {
    const auto o = load_ohlc_text(kThreeRows);
    CHECK(o.size() == 3);
    CHECK(o.dates[2].iso() == "2020-01-06");
}

TEST_CASE("high below low names the row") {
    const std::string csv = "date,open,high,low,close\n2020-01-02,100,101,99,100\n2020-01-03,100,98,99,99\n";
    try {
        (void)load_ohlc_text(csv);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
}

TEST_CASE("unordered dates are a parse error") {
    const std::string csv = "date,open,high,low,close\n2020-01-03,100,101,99,100\n2020-01-02,100,101,99,100\n";
    CHECK_THROWS_AS(load_ohlc_text(csv), ParseError);
    CHECK_THROWS_AS(load_ohlc_text("date,open,high,low\n"), ParseError);
    CHECK_THROWS_AS(load_ohlc_text("date,open,high,low,close\n2020-01-02,100,abc,99,100\n"), ParseError);
}

TEST_CASE("returns and ranges") {
    const auto m = to_market_series(load_ohlc_text(kThreeRows));
    REQUIRE(m.size() == 2);
    CHECK(m.returns[0] == Approx(100.0 * std::log(1.1)).epsilon(1e-14));
    CHECK(m.returns[0] == Approx(9.531).margin(1e-3));
    CHECK(m.realized[0] == Approx(std::log(111.0 / 99.0)).epsilon(1e-14));
    CHECK(m.degenerate.empty());

    const auto flat = to_market_series(load_ohlc_text(
        "date,open,high,low,close\n2020-01-02,5,5,5,5\n2020-01-03,5,5,5,5\n2020-01-06,5,6,5,5\n"));
    CHECK(flat.returns == std::vector<double>{0.0, 0.0});
    REQUIRE(flat.degenerate == std::vector<std::size_t>{0});
    CHECK(flat.realized[0] == 0.0);
    auto floored = flat;
    floored.floor_degenerate_realized();
    CHECK(floored.realized[0] == flat.realized[1]);
}

TEST_CASE("non-overlapping aggregation") {
    const auto s = series_of({1, 2, 3, 4});
    CHECK(aggregate_nonoverlapping(s, 1).returns == s.returns);
    const auto a = aggregate_nonoverlapping(s, 2);
    CHECK(a.returns == std::vector<double>{3, 7});
    CHECK(a.dates[1] == s.dates[3]);
    CHECK(aggregate_nonoverlapping(series_of(std::vector<double>(11, 1.0)), 10).size() == 1);
    CHECK_THROWS_AS(aggregate_nonoverlapping(s, 0), InvalidParameter);
}

TEST_CASE("sample splits") {
    const auto s = series_of(std::vector<double>(4500, 0.1));
    const auto sp = split_at(s, 3000, 1);
    CHECK(sp.in_sample.size() == 3000);
    CHECK(sp.out_of_sample.size() == 1500);

    const auto last = split(s, s.dates.back(), 1);
    CHECK(last.empty_out_of_sample);
    CHECK(last.in_sample.size() == 4500);

    const auto s2 = series_of(std::vector<double>(1375, 0.1));
    const auto h10 = split_at(s2, 1000, 10);
    CHECK(aggregate_nonoverlapping(h10.out_of_sample, 10).size() == 37);
    CHECK_THROWS_AS(split(s, Date{1990, 1, 1}, 1), DomainError);
}

TEST_CASE("market series CSV round trip") {
    const auto m = to_market_series(load_ohlc_text(kThreeRows));
    std::ostringstream out;
    write_market_series(out, m);
    std::istringstream in(out.str());
    const auto back = load_market_series(in);
    REQUIRE(back.size() == m.size());
    for (std::size_t t = 0; t < m.size(); ++t) {
        CHECK(back.returns[t] == Approx(m.returns[t]).epsilon(1e-13));
        CHECK(back.realized[t] == Approx(m.realized[t]).epsilon(1e-13));
    }
}
