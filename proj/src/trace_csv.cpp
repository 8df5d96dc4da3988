#include "apg/trace_csv.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

namespace apg {

namespace {

void put_double(std::ostream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
}

void put_optional(std::ostream& out, const std::optional<double>& v) {
    if (v) put_double(out, *v);
}

} // namespace

void write_trace_csv(std::ostream& out, const Trace& trace,
                     const TraceCsvOptions& options) {
    out << "k,f,gap,mu_hat,mu_running,A_k,gmap_norm,restarted,wall_ns";
    if (options.include_gap_raw) out << ",gap_raw";
    out << '\n';
    const int every = options.record_every < 1 ? 1 : options.record_every;
    for (size_t i = 0; i < trace.records.size(); ++i) {
        const auto& rec = trace.records[i];
        const bool last = i + 1 == trace.records.size();
        if (rec.k % every != 0 && !last) continue;
        out << rec.k << ',';
        put_double(out, rec.f_y);
        out << ',';
        if (rec.gap) put_double(out, *rec.gap < 0.0 ? 0.0 : *rec.gap);
        out << ',';
        put_optional(out, rec.mu_hat);
        out << ',';
        put_optional(out, rec.mu_k);
        out << ',';
        put_optional(out, rec.A_k);
        out << ',';
        put_double(out, rec.gmap_norm);
        out << ',' << (rec.restarted ? 1 : 0) << ',';
        if (options.include_wall_ns) out << rec.wall_ns;
        if (options.include_gap_raw) {
            out << ',';
            put_optional(out, rec.gap);
        }
        out << '\n';
    }
}

std::string trace_csv_string(const Trace& trace, const TraceCsvOptions& options) {
    std::ostringstream out;
    write_trace_csv(out, trace, options);
    return out.str();
}

} // namespace apg
