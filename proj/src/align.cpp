#include "song/align.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace song {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_matrix(const Mat& A) {
    if (A.empty()) throw std::invalid_argument("alignment: attention matrix is empty");
    for (int i = 0; i < A.rows; ++i) {
        bool any = false;
        for (int j = 0; j < A.cols; ++j)
            if (A(i, j) != 0.0) any = true;
        if (!any) throw std::invalid_argument("alignment: attention row " + std::to_string(i + 1) + " is all zero");
    }
}

}  // namespace

double pair_score(const Mat& attention, const SpanPair& p) {
    if (p.tgt_len() == 1) {
        double s = 0.0;
        for (int j = p.src_lo; j <= p.src_hi; ++j) s += attention(p.tgt_lo - 1, j - 1);
        return s;
    }
    if (p.src_len() == 1) {
        double s = 0.0;
        for (int i = p.tgt_lo; i <= p.tgt_hi; ++i) s += attention(i - 1, p.src_lo - 1);
        return s / p.tgt_len();
    }
    throw std::invalid_argument("pair_score: pair is neither one-to-many nor many-to-one");
}

double alignment_score(const Mat& attention, const Alignment& alignment) {
    double s = 0.0;
    for (const SpanPair& p : alignment.pairs) s += pair_score(attention, p);
    return s;
}

DpAlignResult dp_align(const Mat& A) {
    check_matrix(A);
    const int M = A.rows;  // target length
    const int N = A.cols;  // source length

    // F[i][j]: best score tiling the first i target and j source tokens.
    std::vector<std::vector<double>> F(M + 1, std::vector<double>(N + 1, kNegInf));
    std::vector<std::vector<std::pair<int, int>>> path(M + 1, std::vector<std::pair<int, int>>(N + 1, {0, 0}));
    F[0][0] = 0.0;

    // Prefix sums: row_pre[i][j] = sum of A(i, 1..j), col_pre[j][i] likewise.
    std::vector<std::vector<double>> row_pre(M + 1, std::vector<double>(N + 1, 0.0));
    std::vector<std::vector<double>> col_pre(N + 1, std::vector<double>(M + 1, 0.0));
    for (int i = 1; i <= M; ++i)
        for (int j = 1; j <= N; ++j) row_pre[i][j] = row_pre[i][j - 1] + A(i - 1, j - 1);
    for (int j = 1; j <= N; ++j)
        for (int i = 1; i <= M; ++i) col_pre[j][i] = col_pre[j][i - 1] + A(i - 1, j - 1);

    for (int i = 1; i <= M; ++i) {
        for (int j = 1; j <= N; ++j) {
            // target i aligned to sources k+1..j
            for (int k = 0; k <= j - 1; ++k) {
                double score = F[i - 1][k] + (row_pre[i][j] - row_pre[i][k]);
                if (score >= F[i][j]) {
                    F[i][j] = score;
                    path[i][j] = {i - 1, k};
                }
            }
            // targets k+1..i aligned to source j, scored by the average
            for (int k = 0; k <= i - 1; ++k) {
                double score = F[k][j - 1] + (col_pre[j][i] - col_pre[j][k]) / (i - k);
                if (score >= F[i][j]) {
                    F[i][j] = score;
                    path[i][j] = {k, j - 1};
                }
            }
        }
    }

    DpAlignResult result;
    result.score = F[M][N];
    int m = M, n = N;
    while (m != 0 && n != 0) {
        auto [i, j] = path[m][n];
        result.alignment.pairs.push_back(SpanPair{j + 1, n, i + 1, m});
        m = i;
        n = j;
    }
    std::reverse(result.alignment.pairs.begin(), result.alignment.pairs.end());
    return result;
}

Alignment greedy_align(const Mat& A) {
    check_matrix(A);
    const int M = A.rows;
    const int N = A.cols;

    Alignment out;
    SpanPair cur{1, 1, 1, 1};
    int i = 1, j = 1;

    auto col_sum = [&](int col, int lo, int hi) {
        double s = 0.0;
        for (int t = lo; t <= hi; ++t) s += A(t - 1, col - 1);
        return s;
    };

    while (true) {
        if (i == M && j == N) {
            out.pairs.push_back(cur);
            break;
        }
        if (i == M) {  // targets exhausted: leftover sources join the last target
            if (cur.tgt_len() == 1) {
                cur.src_hi = N;
                out.pairs.push_back(cur);
            } else {
                cur.tgt_hi = M - 1;
                out.pairs.push_back(cur);
                out.pairs.push_back(SpanPair{j + 1, N, M, M});
            }
            break;
        }
        if (j == N) {  // sources exhausted: leftover targets join the last source
            if (cur.src_len() == 1) {
                cur.tgt_hi = M;
                out.pairs.push_back(cur);
            } else {
                cur.src_hi = N - 1;
                out.pairs.push_back(cur);
                out.pairs.push_back(SpanPair{N, N, i + 1, M});
            }
            break;
        }

        double gain_new = A(i, j);  // A[i+1][j+1], 1-based
        double gain_src = cur.tgt_len() == 1 ? A(i - 1, j) : kNegInf;
        double gain_tgt = kNegInf;
        if (cur.src_len() == 1) {
            int len = cur.tgt_len();
            double sum = col_sum(j, cur.tgt_lo, cur.tgt_hi);
            gain_tgt = (sum + A(i, j - 1)) / (len + 1) - sum / len;
        }

        if (gain_new >= gain_src && gain_new >= gain_tgt) {
            out.pairs.push_back(cur);
            cur = SpanPair{j + 1, j + 1, i + 1, i + 1};
            ++i;
            ++j;
        } else if (gain_src >= gain_tgt) {
            cur.src_hi = ++j;
        } else {
            cur.tgt_hi = ++i;
        }
    }
    return out;
}

bool is_valid_tiling(const Alignment& alignment, int source_len, int target_len) {
    int src_cursor = 0, tgt_cursor = 0;
    for (const SpanPair& p : alignment.pairs) {
        if (p.src_len() < 1 || p.tgt_len() < 1) return false;
        if (p.src_len() > 1 && p.tgt_len() > 1) return false;
        if (p.src_lo != src_cursor + 1 || p.tgt_lo != tgt_cursor + 1) return false;
        src_cursor = p.src_hi;
        tgt_cursor = p.tgt_hi;
    }
    return src_cursor == source_len && tgt_cursor == target_len;
}

double alignment_accuracy(const std::vector<Alignment>& predicted,
                          const std::vector<Alignment>& reference) {
    if (predicted.size() != reference.size())
        throw std::invalid_argument("alignment_accuracy: song count mismatch");

    long long matches = 0, total = 0;
    for (size_t s = 0; s < predicted.size(); ++s) {
        auto fanout = [](const Alignment& a) {
            std::vector<int> f;
            for (const SpanPair& p : a.pairs) {
                if (p.src_hi > static_cast<int>(f.size())) f.resize(p.src_hi, 0);
                for (int j = p.src_lo; j <= p.src_hi; ++j) f[j - 1] += p.tgt_len();
            }
            return f;
        };
        std::vector<int> pf = fanout(predicted[s]);
        std::vector<int> rf = fanout(reference[s]);
        if (pf.size() != rf.size())
            throw std::invalid_argument("alignment_accuracy: source length mismatch in song " + std::to_string(s));
        for (size_t j = 0; j < pf.size(); ++j) {
            if (pf[j] == rf[j]) ++matches;
            ++total;
        }
    }
    if (total == 0) throw std::invalid_argument("alignment_accuracy: empty input");
    return static_cast<double>(matches) / static_cast<double>(total);
}

}  // namespace song
