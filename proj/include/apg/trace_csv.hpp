#pragma once

#include "apg/solvers.hpp"

#include <iosfwd>
#include <string>

namespace apg {

struct TraceCsvOptions {
    int record_every = 1;       // thins rows; the in-memory trace stays full
    bool include_wall_ns = false; // off by default so reruns are byte-identical
    bool include_gap_raw = true;  // shadow column with the unclamped gap
};

/// Schema: k,f,gap,mu_hat,mu_running,A_k,gmap_norm,restarted,wall_ns with
/// absent values as empty fields; gap is clamped at 0, the raw value goes to
/// the trailing gap_raw shadow column when enabled.
void write_trace_csv(std::ostream& out, const Trace& trace,
                     const TraceCsvOptions& options = {});

std::string trace_csv_string(const Trace& trace, const TraceCsvOptions& options = {});

} // namespace apg
