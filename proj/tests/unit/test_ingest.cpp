#include "cdbn/ingest.hpp"

#include "../support/temp_files.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace cdbn;
using cdbn::testing::test_dir;
using cdbn::testing::write_text;

namespace {

Date d(const char* iso) { return *parse_iso_date(iso); }

AlignedTable single_column(const std::string& name, std::vector<double> values) {
    AlignedTable t;
    for (std::size_t i = 0; i < values.size(); ++i) t.dates.push_back(d("2021-03-01") + std::chrono::days{i});
    t.columns.push_back({name, std::move(values)});
    return t;
}

std::vector<Direction> column_states(const DirectionMatrix& m, const std::string& name) {
    std::vector<Direction> out;
    const auto c = m.require_index(name);
    for (std::size_t r = 0; r < m.rows(); ++r) out.push_back(m.at(r, c));
    return out;
}

} // namespace

TEST(Dates, StrictIsoParsing) {
    EXPECT_TRUE(parse_iso_date("2020-02-29"));
    EXPECT_FALSE(parse_iso_date("2021-02-29"));
    EXPECT_FALSE(parse_iso_date("2021-2-01"));
    EXPECT_FALSE(parse_iso_date("01/02/2021"));
    EXPECT_FALSE(parse_iso_date("2021-01-01T00"));
    EXPECT_EQ(format_iso_date(d("2019-12-31")), "2019-12-31");
    EXPECT_TRUE(is_weekend(d("2021-03-06")));   // Saturday
    EXPECT_FALSE(is_weekend(d("2021-03-08")));  // Monday
}

TEST(LoadCsv, ThreeValidOhlcvRows) {
    auto dir = test_dir();
    auto path = write_text(dir / "c.csv",
                           "Date,Open,High,Low,Close,Volume\n"
                           "2021-01-03,3,4,2,3.5,30\n"
                           "2021-01-01,1,2,0.5,1.5,10\n"
                           "2021-01-02,2,3,1,2.5,20\n");
    Diagnostics diag(nullptr);
    auto t = load_csv(path, SourceKind::Ohlcv, diag);
    EXPECT_EQ(t.rows(), 3u);
    EXPECT_EQ(t.columns.size(), 5u);
    EXPECT_EQ(t.dates.front(), d("2021-01-01"));
    EXPECT_EQ(t.column("close").values, (std::vector<double>{1.5, 2.5, 3.5}));
    EXPECT_EQ(diag.count(), 0u);
}

TEST(LoadCsv, ByteOrderMarkAndCrLf) {
    auto dir = test_dir();
    auto path = write_text(dir / "c.csv", "\xEF\xBB\xBF" "date,open,high,low,close,volume\r\n2021-01-01,1,2,0.5,1.5,10\r\n");
    Diagnostics diag(nullptr);
    EXPECT_EQ(load_csv(path, SourceKind::Ohlcv, diag).rows(), 1u);
}

TEST(LoadCsv, DuplicateDateIsAnError) {
    auto dir = test_dir();
    auto path = write_text(dir / "c.csv",
                           "date,open,high,low,close,volume\n"
                           "2021-01-01,1,2,0.5,1.5,10\n"
                           "2021-01-01,2,3,1,2.5,20\n");
    Diagnostics diag(nullptr);
    try {
        load_csv(path, SourceKind::Ohlcv, diag);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DuplicateDate);
    }
}

TEST(LoadCsv, HighBelowLowRowIsRejectedWithOneDiagnostic) {
    auto dir = test_dir();
    auto path = write_text(dir / "c.csv",
                           "date,open,high,low,close,volume\n"
                           "2021-01-01,1,2,0.5,1.5,10\n"
                           "2021-01-02,2,1,3,2.5,20\n"
                           "2021-01-03,3,4,2,3.5,30\n");
    std::ostringstream sink;
    Diagnostics diag(&sink);
    auto t = load_csv(path, SourceKind::Ohlcv, diag);
    EXPECT_EQ(t.rows(), 2u);
    ASSERT_EQ(diag.count(), 1u);
    EXPECT_EQ(sink.str().rfind("WARN " + path + ":3 ", 0), 0u) << sink.str();
}

TEST(LoadCsv, MissingColumnAndEmptyTable) {
    auto dir = test_dir();
    Diagnostics diag(nullptr);
    auto no_volume = write_text(dir / "a.csv", "date,open,high,low,close\n2021-01-01,1,2,0.5,1.5\n");
    EXPECT_THROW(
        {
            try {
                load_csv(no_volume, SourceKind::Ohlcv, diag);
            } catch (const Error& e) {
                EXPECT_EQ(e.code(), ErrorCode::MissingColumn);
                throw;
            }
        },
        Error);
    auto only_bad = write_text(dir / "b.csv", "date,tweet_count\nnot-a-date,4\n");
    try {
        load_csv(only_bad, SourceKind::Tweets, diag);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyTable);
    }
    try {
        load_csv((dir / "absent.csv").string(), SourceKind::Macro, diag);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::FileNotFound);
    }
}

TEST(LoadCsv, UnparseableNumberDropsRow) {
    auto dir = test_dir();
    auto path = write_text(dir / "m.csv", "date,gold\n2021-01-01,1\n2021-01-02,abc\n2021-01-03,3\n");
    Diagnostics diag(nullptr);
    auto t = load_csv(path, SourceKind::Macro, diag);
    EXPECT_EQ(t.rows(), 2u);
    EXPECT_EQ(diag.count(), 1u);
}

TEST(LoadCsv, ShortGapsAreForwardFilledLongGapsDropRows) {
    auto dir = test_dir();
    std::string text = "date,gold\n2021-01-01,1\n2021-01-02,\n2021-01-03,NA\n2021-01-04,null\n2021-01-05,5\n";
    text += "2021-01-06,\n2021-01-07,\n2021-01-08,\n2021-01-09,\n2021-01-10,10\n";
    auto path = write_text(dir / "m.csv", text);
    Diagnostics diag(nullptr);
    auto t = load_csv(path, SourceKind::Macro, diag);
    EXPECT_EQ(t.column("gold").values, (std::vector<double>{1, 1, 1, 1, 5, 10}));
    EXPECT_EQ(diag.count(), 4u);
}

TEST(LoadCsv, TweetCountsBecomeTweetsColumn) {
    auto dir = test_dir();
    auto path = write_text(dir / "t.csv", "date,tweet_count\n2021-01-01,100\n2021-01-02,120\n");
    Diagnostics diag(nullptr);
    auto t = load_csv(path, SourceKind::Tweets, diag);
    EXPECT_EQ(as_aligned(t).column_names(), (std::vector<std::string>{"social.tweets"}));
}

TEST(Align, WeekdaysSurviveAgainstMacro) {
    TimeSeriesTable ohlcv;
    ohlcv.kind = SourceKind::Ohlcv;
    TimeSeriesTable macro;
    macro.kind = SourceKind::Macro;
    for (int i = 0; i < 7; ++i) ohlcv.dates.push_back(d("2021-03-01") + std::chrono::days{i});  // Mon..Sun
    for (int i = 0; i < 5; ++i) macro.dates.push_back(d("2021-03-01") + std::chrono::days{i});  // Mon..Fri
    for (const char* n : {"open", "high", "low", "close", "volume"}) ohlcv.columns.push_back({n, std::vector<double>(7, 1.0)});
    macro.columns.push_back({"gold", {1, 2, 3, 4, 5}});
    auto a = align(std::vector<TimeSeriesTable>{ohlcv, macro});
    EXPECT_EQ(a.dates, macro.dates);
    EXPECT_EQ(a.column_names(), (std::vector<std::string>{"price.open", "price.high", "price.low", "price.close",
                                                          "price.volume", "macro.gold"}));
    EXPECT_EQ(a.column("macro.gold").values, (std::vector<double>{1, 2, 3, 4, 5}));
}

TEST(Align, IdenticalDatesKeepEverything) {
    auto a = single_column("price.close", {1, 2, 3});
    auto b = single_column("macro.gold", {4, 5, 6});
    auto out = align(std::vector<AlignedTable>{a, b});
    EXPECT_EQ(out.dates, a.dates);
    EXPECT_EQ(out.columns.size(), 2u);
}

TEST(Align, DisjointDatesAreAnError) {
    auto a = single_column("price.close", {1, 2, 3});
    auto b = single_column("macro.gold", {4, 5, 6});
    for (auto& dt : b.dates) dt += std::chrono::days{30};
    try {
        align(std::vector<AlignedTable>{a, b});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyIntersection);
    }
}

TEST(Align, Idempotent) {
    auto a = single_column("price.close", {1, 2, 3, 4, 5, 6, 7});
    auto b = single_column("macro.gold", {4, 5, 6, 7, 8, 9, 10});
    b.weekdays_only = true;
    auto once = align(std::vector<AlignedTable>{a, b});
    EXPECT_EQ(align(std::vector<AlignedTable>{once}), once);
}

TEST(Normalize, DirectFormula) {
    auto n = min_max_normalize(single_column("x", {2, 4, 6}));
    EXPECT_EQ(n.table.columns[0].values, (std::vector<double>{0, 0.5, 1}));
}

TEST(Normalize, ConstantColumnBecomesHalfWithDiagnostic) {
    Diagnostics diag(nullptr);
    auto n = min_max_normalize(single_column("x", {1.01, 1.01}), 2, &diag);
    EXPECT_EQ(n.table.columns[0].values, (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(n.constant_columns, (std::vector<std::string>{"x"}));
    EXPECT_EQ(diag.count(), 1u);
}

TEST(Normalize, TrainingStatisticsExtrapolate) {
    auto n = min_max_normalize(single_column("x", {0, 10, 5, 12}), 3);
    EXPECT_DOUBLE_EQ(n.table.columns[0].values[3], 1.2);
    EXPECT_EQ(n.ranges[0], (std::pair<double, double>{0, 10}));
}

TEST(Label, Examples) {
    EXPECT_EQ(column_states(label_directions(single_column("price.close", {10, 9})), "price.close"),
              (std::vector<Direction>{Direction::Down}));
    EXPECT_EQ(column_states(label_directions(single_column("price.close", {10, 10})), "price.close"),
              (std::vector<Direction>{Direction::Up}));
    EXPECT_EQ(column_states(label_directions(single_column("price.close", {1, 2, 2, 1})), "price.close"),
              (std::vector<Direction>{Direction::Up, Direction::Up, Direction::Down}));
}

TEST(Label, Guards) {
    try {
        label_directions(single_column("price.close", {1}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TooFewRows);
    }
    try {
        label_directions(single_column("macro.gold", {1, 2}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingColumn);
    }
}

TEST(Label, InvariantUnderNormalizationAndOneRowShorter) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> step(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        AlignedTable t = single_column("price.close", {});
        t.columns.push_back({"macro.gold", {}});
        const std::size_t n = 30 + static_cast<std::size_t>(trial);
        t.dates.clear();
        for (std::size_t i = 0; i < n; ++i) {
            t.dates.push_back(d("2021-01-01") + std::chrono::days{i});
            // Rounded so exact ties occur.
            t.columns[0].values.push_back(std::round(100 + 3 * step(rng)));
            t.columns[1].values.push_back(50 + step(rng));
        }
        const auto raw = label_directions(t);
        const auto norm = label_directions(min_max_normalize(t, n / 2).table);
        EXPECT_EQ(raw, norm);
        EXPECT_EQ(raw.rows(), n - 1);
        for (auto s : raw.states) EXPECT_LE(s, 1u);
    }
}

TEST(DirectionMatrixOps, SelectAndSlice) {
    AlignedTable t = single_column("price.close", {1, 2, 1, 3});
    t.columns.push_back({"macro.gold", {5, 4, 4, 3}});
    auto m = label_directions(t);
    auto s = m.select({"macro.gold"});
    EXPECT_EQ(s.variables, (std::vector<std::string>{"macro.gold"}));
    EXPECT_EQ(column_states(s, "macro.gold"), (std::vector<Direction>{Direction::Down, Direction::Up, Direction::Down}));
    auto tail = m.slice_rows(1, 3);
    EXPECT_EQ(tail.rows(), 2u);
    EXPECT_EQ(tail.dates.front(), m.dates[1]);
    EXPECT_THROW(m.require_index("nope"), Error);
}
