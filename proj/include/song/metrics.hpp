#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "song/note.hpp"

namespace song {

// Normalized frequency histogram over integer bins (MIDI pitches or
// sixteenth-note duration counts). Frequencies sum to 1.
using Histogram = std::map<int, double>;

enum class HistogramKind { Pitch, Duration };

// Pitch histograms skip rests (a rest has no pitch); duration histograms
// count every note including rests. Empty result for an all-rest song in
// pitch mode.
Histogram melody_histogram(const MelodySong& song, HistogramKind kind);

// Overlapped area of two normalized histograms: sum over bins of min(p, q).
// Symmetric, in [0, 1], and 1 exactly when the histograms match.
double overlap_area(const Histogram& p, const Histogram& q);

// Mean per-song overlapped area between generated and reference histograms,
// paired by index. Songs whose histogram is empty are skipped and reported
// through the warn callback.
double distribution_similarity(const std::vector<MelodySong>& generated,
                               const std::vector<MelodySong>& reference,
                               HistogramKind kind,
                               const std::function<void(const std::string&)>& warn = {});

// Per-sixteenth pitch time series, mean-subtracted. Rests carry the previous
// pitch; leading rests take the first pitched value. Throws on an all-rest
// song.
std::vector<double> pitch_time_series(const MelodySong& song);

// Classic full-table dynamic time warping with |a-b| cell cost.
double dtw_distance(const std::vector<double>& a, const std::vector<double>& b);

// DTW between the mean-normalized pitch series of the two songs. Invariant
// under a constant pitch offset of either input.
double melody_distance(const MelodySong& generated, const MelodySong& reference);

// exp of the mean per-token negative log-likelihood.
double perplexity_from_nll(double total_nll, long long token_count);

}  // namespace song
