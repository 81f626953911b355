#include <cmath>

#include <stdexcept>

#include "doctest.h"
#include "fixtures.hpp"
#include "song/metrics.hpp"

using namespace song;

namespace {

MelodySong simple_song(const std::vector<int>& pitches, const std::vector<int>& durations) {
    MelodySong s;
    long long onset = 0;
    for (size_t i = 0; i < pitches.size(); ++i) {
        s.notes.push_back(Note{pitches[i], onset, durations[i]});
        onset += durations[i];
    }
    s.phrase_boundaries = {static_cast<int>(pitches.size())};
    return s;
}

// Plain recursive-with-memo DTW, written independently of the iterative table.
double dtw_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<std::vector<double>> memo(a.size(), std::vector<double>(b.size(), -1.0));
    auto rec = [&](auto&& self, int i, int j) -> double {
        if (i < 0 || j < 0) return (i < 0 && j < 0) ? 0.0 : 1e300;
        if (memo[i][j] >= 0.0) return memo[i][j];
        double best = std::min({self(self, i - 1, j), self(self, i, j - 1), self(self, i - 1, j - 1)});
        return memo[i][j] = std::abs(a[i] - b[j]) + best;
    };
    return rec(rec, static_cast<int>(a.size()) - 1, static_cast<int>(b.size()) - 1);
}

}  // namespace

TEST_CASE("overlap area hand cases") {
    Histogram p = {{60, 0.5}, {62, 0.5}};
    Histogram q = {{60, 0.5}, {64, 0.5}};
    CHECK(overlap_area(p, q) == doctest::Approx(0.5));
    CHECK(overlap_area(q, p) == doctest::Approx(0.5));

    CHECK(overlap_area(p, p) == doctest::Approx(1.0));

    Histogram r = {{10, 1.0}};
    Histogram s = {{20, 1.0}};
    CHECK(overlap_area(r, s) == doctest::Approx(0.0));
}

TEST_CASE("overlap area is symmetric, bounded, and 1 only for identical histograms") {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        auto random_hist = [&](int bins) {
            Histogram h;
            double total = 0.0;
            for (int b = 0; b < bins; ++b) {
                double v = rng.uniform();
                h[static_cast<int>(rng.uniform_int(50, 60))] += v;
                total += v;
            }
            for (auto& [k, v] : h) v /= total;
            return h;
        };
        Histogram p = random_hist(4), q = random_hist(4);
        double oa = overlap_area(p, q);
        CHECK(oa >= 0.0);
        CHECK(oa <= 1.0 + 1e-12);
        CHECK(oa == doctest::Approx(overlap_area(q, p)));
        CHECK(overlap_area(p, p) == doctest::Approx(1.0));
    }
}

TEST_CASE("distribution similarity identities") {
    MelodySong a = simple_song({60, 62, 64}, {2, 2, 4});
    MelodySong b = simple_song({60, 64, 64}, {2, 2, 2});
    CHECK(distribution_similarity({a, b}, {a, b}, HistogramKind::Pitch) == doctest::Approx(1.0));
    CHECK(distribution_similarity({a, b}, {a, b}, HistogramKind::Duration) == doctest::Approx(1.0));

    MelodySong c = simple_song({100, 101, 102}, {1, 1, 1});
    CHECK(distribution_similarity({a}, {c}, HistogramKind::Pitch) == doctest::Approx(0.0));
}

TEST_CASE("pitch histograms skip rests, duration histograms keep them") {
    MelodySong s = simple_song({60, kRest, 64}, {2, 4, 2});
    Histogram pitch = melody_histogram(s, HistogramKind::Pitch);
    CHECK(pitch.size() == 2);
    CHECK(pitch[60] == doctest::Approx(0.5));
    Histogram dur = melody_histogram(s, HistogramKind::Duration);
    CHECK(dur[4] == doctest::Approx(1.0 / 3));
    CHECK(dur[2] == doctest::Approx(2.0 / 3));
}

TEST_CASE("melody histograms are normalized with non-negative frequencies") {
    Rng rng(27);
    for (int trial = 0; trial < 100; ++trial) {
        MelodySong s = fixtures::random_melody(rng);
        for (HistogramKind kind : {HistogramKind::Pitch, HistogramKind::Duration}) {
            Histogram h = melody_histogram(s, kind);
            if (h.empty()) continue;  // all-rest pitch histogram
            double sum = 0.0;
            for (const auto& [bin, freq] : h) {
                CHECK(freq >= 0.0);
                sum += freq;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("pitch time series spreads notes over sixteenths and centers the mean") {
    MelodySong s = simple_song({60, 64}, {2, 2});
    std::vector<double> series = pitch_time_series(s);
    std::vector<double> expected = {-2, -2, 2, 2};
    CHECK(series == expected);

    // rests carry the previous pitch; leading rests take the first pitch
    MelodySong r = simple_song({kRest, 60, kRest, 64}, {1, 1, 1, 1});
    series = pitch_time_series(r);
    // values before centering: 60 60 60 64, mean 61
    std::vector<double> expected_r = {-1, -1, -1, 3};
    CHECK(series == expected_r);

    MelodySong all_rest = simple_song({kRest}, {4});
    CHECK_THROWS_AS(pitch_time_series(all_rest), std::invalid_argument);
}

TEST_CASE("melody distance identities and the hand-run DTW table") {
    MelodySong a = simple_song({60, 62, 64, 62}, {2, 2, 2, 2});
    CHECK(melody_distance(a, a) == doctest::Approx(0.0));

    // a uniform transposition disappears under mean normalization
    MelodySong b = simple_song({65, 67, 69, 67}, {2, 2, 2, 2});
    CHECK(melody_distance(a, b) == doctest::Approx(0.0));
    CHECK(melody_distance(b, a) == doctest::Approx(0.0));

    // hand-run DTW: series [0,0,1] vs [0,1,1] (per-sixteenth pitches 60/61)
    // mean-normalized a = [-1/3,-1/3,2/3], b = [-2/3,1/3,1/3]; table gives 4/3
    MelodySong x = simple_song({60, 60, 61}, {1, 1, 1});
    MelodySong y = simple_song({60, 61, 61}, {1, 1, 1});
    CHECK(melody_distance(x, y) == doctest::Approx(4.0 / 3).epsilon(1e-12));
}

TEST_CASE("dtw distance equals the recursive oracle on random series") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 1 + static_cast<int>(rng.uniform_int(0, 19));
        int m = 1 + static_cast<int>(rng.uniform_int(0, 19));
        std::vector<double> a(n), b(m);
        for (double& v : a) v = rng.uniform(-5, 5);
        for (double& v : b) v = rng.uniform(-5, 5);
        CHECK(dtw_distance(a, b) == doctest::Approx(dtw_oracle(a, b)).epsilon(1e-12));
        CHECK(dtw_distance(a, b) == doctest::Approx(dtw_distance(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("perplexity helper") {
    CHECK(perplexity_from_nll(0.0, 10) == doctest::Approx(1.0));  // one-hot-correct model
    CHECK(perplexity_from_nll(std::log(50.0) * 7, 7) == doctest::Approx(50.0));  // uniform over 50
    CHECK_THROWS_AS(perplexity_from_nll(1.0, 0), std::invalid_argument);
}

TEST_CASE("all-rest songs are skipped with a warning in distribution similarity") {
    MelodySong pitched = simple_song({60, 64}, {2, 2});
    MelodySong silent = simple_song({kRest}, {4});
    std::vector<std::string> warnings;
    double pd = distribution_similarity({pitched, silent}, {pitched, pitched}, HistogramKind::Pitch,
                                        [&](const std::string& w) { warnings.push_back(w); });
    CHECK(pd == doctest::Approx(1.0));  // only the valid pair counts
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("skipped") != std::string::npos);

    // nothing left to compare is an error
    CHECK_THROWS_AS(distribution_similarity({silent}, {silent}, HistogramKind::Pitch),
                    std::invalid_argument);
}
