#pragma once

#include <cstdint>

#include "ctes/data.hpp"
#include "ctes/heads.hpp"

namespace ctes {

// iid gaps from one log-normal, uniform marks
Dataset gen_constant_lognormal(int n_seq, int seq_len, double mu, double sigma2,
                               int n_marks, std::uint64_t seed);

// iid gaps, mark 0 with probability p0 regardless of history
Dataset gen_mark_biased(int n_seq, int seq_len, double p0, int n_marks, std::uint64_t seed);

// 2-state alternating generator: gaps alternate between a short and a long
// log-normal regime; the mark carries the regime
Dataset gen_alternating(int n_seq, int seq_len, std::uint64_t seed, double noise = 0.05);

// parity-dependent gaps with uninformative uniform marks; used for transfer
// experiments (the regime is only visible through the previous gap)
Dataset gen_parity_gaps(int n_seq, int seq_len, int n_marks, std::uint64_t seed,
                        const std::string& mark_prefix = "m");

// planar random walk: log-normal gaps and step distances, uniform marks
Dataset gen_spatial(int n_seq, int seq_len, int n_marks, std::uint64_t seed);

}  // namespace ctes
