#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hypercaps/corpus.hpp"

// Converts published pair files into canonical TSV (X1, X2, label).
namespace hypercaps::importer {

struct SplitFiles {
  std::filesystem::path train;
  std::filesystem::path validation;
  std::filesystem::path test;
};

struct CorpusSource {
  std::string name;
  SplitFiles files;
};

// Finds train / validation (valid, val, dev) / test files in `src_dir` or its
// immediate subdirectories. Files sharing a name once the split keyword is
// removed form one corpus. Throws CorpusError listing the expected files when
// nothing matches.
std::vector<CorpusSource> detect_layout(const std::filesystem::path& src_dir);

// Reads tab- or comma-separated rows holding two entity columns and one
// label column (first or last). Accepted labels: 1/0, true/false, yes/no,
// positive/negative, pos/neg, -1 (negative). A leading header row without a
// recognisable label is skipped.
std::vector<corpus::EntityPair> read_published_file(const std::filesystem::path& path);

struct ReportRow {
  std::string corpus;
  std::string split;
  corpus::SplitCounts counts;
};

struct ImportReport {
  std::vector<ReportRow> rows;
  std::string to_tsv() const;
};

// Writes <out_dir>/<corpus>/{train,validation,test}.tsv and
// <out_dir>/stats.tsv. Output is a pure function of the input files.
ImportReport import_corpora(const std::filesystem::path& src_dir, const std::filesystem::path& out_dir);

}  // namespace hypercaps::importer
