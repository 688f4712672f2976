#include "eimnet/report.hpp"

#include <cstdio>

namespace eimnet {

namespace {

const char* kPortNames[4] = {"sync", "d", "q", "dc"};

std::string entry_name(const std::string& prefix, Index i, Index j) {
    return prefix + "_" + std::to_string(i + 1) + std::to_string(j + 1);
}

}  // namespace

std::string format_number(double v) {
    if (v == 0.0) v = 0.0;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10e", v);
    return buf;
}

CsvWriter& CsvWriter::header(const std::vector<std::string>& cols) {
    for (const auto& c : cols) cell(c);
    end_row();
    return *this;
}

CsvWriter& CsvWriter::cell(const std::string& s) {
    if (!first_) os_ << ',';
    first_ = false;
    if (s.find_first_of(",\"\n") != std::string::npos) {
        os_ << '"';
        for (char ch : s) {
            if (ch == '"') os_ << '"';
            os_ << ch;
        }
        os_ << '"';
    } else {
        os_ << s;
    }
    return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_number(v)); }
CsvWriter& CsvWriter::cell(int v) { return cell(std::to_string(v)); }
CsvWriter& CsvWriter::cell(cplx v) { return cell(v.real()).cell(v.imag()); }

void CsvWriter::end_row() {
    os_ << '\n';
    first_ = true;
}

void write_modes_csv(std::ostream& os, const std::vector<Mode>& modes) {
    CsvWriter w(os);
    w.header({"mode", "s_re", "s_im", "frequency_hz", "damping_ratio", "lambda_re", "lambda_im", "residual",
              "iterations", "unstable"});
    int k = 1;
    for (const auto& m : modes) {
        w.cell(k++).cell(m.s).cell(m.frequency_hz()).cell(m.damping_ratio()).cell(m.lambda).cell(m.residual);
        w.cell(m.iterations).cell(std::string(m.unstable() ? "1" : "0"));
        w.end_row();
    }
}

void write_node_pf_csv(std::ostream& os, const std::vector<NodeParticipation>& pf) {
    CsvWriter w(os);
    w.header({"node", "pf_re", "pf_im", "pf_abs"});
    for (const auto& p : pf) {
        w.cell(p.node_id).cell(p.value).cell(std::abs(p.value));
        w.end_row();
    }
}

void write_sensitivity_csv(std::ostream& os, const std::vector<EntrySensitivity>& rows) {
    CsvWriter w(os);
    w.header({"entry", "component", "row", "col", "value_re", "value_im", "sensitivity_re", "sensitivity_im",
              "sensitivity_abs"});
    for (const auto& r : rows) {
        w.cell(r.label).cell(r.component).cell(static_cast<int>(r.row)).cell(static_cast<int>(r.col));
        w.cell(r.value).cell(r.sensitivity).cell(std::abs(r.sensitivity));
        w.end_row();
    }
}

void write_validation_csv(std::ostream& os, const std::vector<ValidationRow>& rows) {
    CsvWriter w(os);
    w.header({"entry", "predicted_re", "predicted_im", "actual_re", "actual_im", "error", "track_lost"});
    for (const auto& r : rows) {
        w.cell(r.entry.label).cell(r.predicted).cell(r.actual).cell(r.error);
        w.cell(std::string(r.track_lost ? "1" : "0"));
        w.end_row();
    }
}

void write_scan_csv(std::ostream& os, const ScanResult& scan, const std::vector<CMatrix>& analytic) {
    CsvWriter w(os);
    std::vector<std::string> cols = {"freq_hz"};
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 4; ++j) {
            const std::string n = std::string("Y_") + kPortNames[i] + "_" + kPortNames[j];
            cols.push_back(n + "_re");
            cols.push_back(n + "_im");
            if (!analytic.empty()) {
                cols.push_back(n + "_model_re");
                cols.push_back(n + "_model_im");
            }
        }
    cols.push_back("condition");
    w.header(cols);
    for (std::size_t p = 0; p < scan.points.size(); ++p) {
        const auto& pt = scan.points[p];
        w.cell(pt.freq_hz);
        for (Index i = 0; i < 4; ++i)
            for (Index j = 0; j < 4; ++j) {
                w.cell(pt.y_dq(i, j));
                if (!analytic.empty()) w.cell(analytic[p](i, j));
            }
        w.cell(pt.condition);
        w.end_row();
    }
}

void write_matrix_sweep_csv(std::ostream& os, const std::vector<double>& freq_hz, const std::vector<CMatrix>& values,
                            const std::string& prefix) {
    CsvWriter w(os);
    std::vector<std::string> cols = {"freq_hz"};
    if (!values.empty())
        for (Index i = 0; i < values.front().rows(); ++i)
            for (Index j = 0; j < values.front().cols(); ++j) {
                cols.push_back(entry_name(prefix, i, j) + "_re");
                cols.push_back(entry_name(prefix, i, j) + "_im");
            }
    w.header(cols);
    for (std::size_t p = 0; p < freq_hz.size(); ++p) {
        w.cell(freq_hz[p]);
        for (Index i = 0; i < values[p].rows(); ++i)
            for (Index j = 0; j < values[p].cols(); ++j) w.cell(values[p](i, j));
        w.end_row();
    }
}

void write_oracle_csv(std::ostream& os, const std::string& case_name, const OracleResult& r) {
    CsvWriter w(os);
    w.header({"case", "ein_unstable", "ein_s_re", "ein_s_im", "ein_freq_hz", "ss_unstable", "ss_rightmost_re",
              "ss_rightmost_im", "ss_match_re", "ss_match_im", "sim_verdict", "sim_growth", "sim_end_time",
              "sim_peak_hz", "sim_peak_probe", "agree"});
    const cplx ein_s = r.ein_mode ? r.ein_mode->s : cplx(0.0, 0.0);
    const cplx match = r.ss_match.value_or(cplx(0.0, 0.0));
    w.cell(case_name).cell(r.ein_unstable() ? 1 : 0).cell(ein_s).cell(r.ein_mode ? r.ein_mode->frequency_hz() : 0.0);
    w.cell(r.ss_unstable() ? 1 : 0).cell(r.ss_rightmost).cell(match);
    w.cell(to_string(r.sim.verdict)).cell(r.sim.growth).cell(r.sim.end_time).cell(r.sim.peak_hz).cell(r.sim.peak_probe);
    w.cell(r.verdicts_agree() ? 1 : 0);
    w.end_row();
}

}  // namespace eimnet
