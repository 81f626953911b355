#include "song/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace song {

Histogram melody_histogram(const MelodySong& song, HistogramKind kind) {
    Histogram h;
    double total = 0.0;
    for (const Note& n : song.notes) {
        if (kind == HistogramKind::Pitch) {
            if (n.is_rest()) continue;
            h[n.pitch] += 1.0;
        } else {
            h[n.duration] += 1.0;
        }
        total += 1.0;
    }
    for (auto& [bin, freq] : h) freq /= total;
    return h;
}

double overlap_area(const Histogram& p, const Histogram& q) {
    double area = 0.0;
    for (const auto& [bin, freq] : p) {
        auto it = q.find(bin);
        if (it != q.end()) area += std::min(freq, it->second);
    }
    return area;
}

double distribution_similarity(const std::vector<MelodySong>& generated,
                               const std::vector<MelodySong>& reference,
                               HistogramKind kind,
                               const std::function<void(const std::string&)>& warn) {
    if (generated.size() != reference.size())
        throw std::invalid_argument("distribution_similarity: song counts differ");
    if (generated.empty())
        throw std::invalid_argument("distribution_similarity: no songs");

    double sum = 0.0;
    long long used = 0;
    for (size_t i = 0; i < generated.size(); ++i) {
        Histogram p = melody_histogram(generated[i], kind);
        Histogram q = melody_histogram(reference[i], kind);
        if (p.empty() || q.empty()) {
            if (warn) warn("song " + std::to_string(i) + " skipped: empty histogram");
            continue;
        }
        sum += overlap_area(p, q);
        ++used;
    }
    if (used == 0) throw std::invalid_argument("distribution_similarity: every pair was skipped");
    return sum / static_cast<double>(used);
}

std::vector<double> pitch_time_series(const MelodySong& song) {
    int first_pitch = kRest;
    for (const Note& n : song.notes) {
        if (!n.is_rest()) {
            first_pitch = n.pitch;
            break;
        }
    }
    if (first_pitch == kRest) throw std::invalid_argument("pitch_time_series: song has no pitched notes");

    std::vector<double> series;
    int current = first_pitch;  // leading rests carry the first pitch
    for (const Note& n : song.notes) {
        if (!n.is_rest()) current = n.pitch;
        for (int t = 0; t < n.duration; ++t) series.push_back(current);
    }
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(series.size());
    for (double& v : series) v -= mean;
    return series;
}

double dtw_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("dtw_distance: empty series");
    const size_t n = a.size(), m = b.size();
    std::vector<double> prev(m), cur(m);

    prev[0] = std::abs(a[0] - b[0]);
    for (size_t j = 1; j < m; ++j) prev[j] = prev[j - 1] + std::abs(a[0] - b[j]);
    for (size_t i = 1; i < n; ++i) {
        cur[0] = prev[0] + std::abs(a[i] - b[0]);
        for (size_t j = 1; j < m; ++j)
            cur[j] = std::abs(a[i] - b[j]) + std::min({prev[j], prev[j - 1], cur[j - 1]});
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

double melody_distance(const MelodySong& generated, const MelodySong& reference) {
    return dtw_distance(pitch_time_series(generated), pitch_time_series(reference));
}

double perplexity_from_nll(double total_nll, long long token_count) {
    if (token_count <= 0) throw std::invalid_argument("perplexity: no tokens");
    return std::exp(total_nll / static_cast<double>(token_count));
}

}  // namespace song
