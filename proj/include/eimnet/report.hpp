#pragma once

// Deterministic CSV output. Complex values become re/im column pairs.

#include "eimnet/fma.hpp"
#include "eimnet/oracle.hpp"
#include "eimnet/scan.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace eimnet {

/// Fixed "%.10e" formatting; "-0" is written as "0".
std::string format_number(double v);

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}
    CsvWriter& header(const std::vector<std::string>& cols);
    CsvWriter& cell(const std::string& s);
    CsvWriter& cell(double v);
    CsvWriter& cell(int v);
    CsvWriter& cell(cplx v);  ///< two cells
    void end_row();

private:
    std::ostream& os_;
    bool first_ = true;
};

void write_modes_csv(std::ostream& os, const std::vector<Mode>& modes);
void write_node_pf_csv(std::ostream& os, const std::vector<NodeParticipation>& pf);
void write_sensitivity_csv(std::ostream& os, const std::vector<EntrySensitivity>& rows);
void write_validation_csv(std::ostream& os, const std::vector<ValidationRow>& rows);
/// Canonical-order EIM entries; `analytic` may be empty or one matrix per point.
void write_scan_csv(std::ostream& os, const ScanResult& scan, const std::vector<CMatrix>& analytic);
/// Sweep of a matrix-valued function on j omega: one re/im pair per entry.
void write_matrix_sweep_csv(std::ostream& os, const std::vector<double>& freq_hz, const std::vector<CMatrix>& values,
                            const std::string& prefix);
void write_oracle_csv(std::ostream& os, const std::string& case_name, const OracleResult& r);

}  // namespace eimnet
