#pragma once

#include "elicit/dataset.hpp"
#include "elicit/descriptors.hpp"
#include "elicit/prediction.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace elicit {

// Line-delimited JSON records. Blank lines are skipped; any other malformed line raises
// FormatError naming the line number.

/// Fields `id`, `keywords`, `target`, `category`.
std::vector<DocumentRecord> read_document_records(std::istream& in);
void write_document_records(std::ostream& out, const std::vector<DocumentRecord>& records);

/// Fields `id`, `keywords`; the id is only checked for presence.
AuxCorpus read_aux_corpus(std::istream& in);
void write_aux_corpus(std::ostream& out, const AuxCorpus& aux);

/// Self-describing JSON dataset ("elicit-dataset" v1) with X stored sparsely as column lists.
void write_dataset(std::ostream& out, const Dataset& d);
Dataset read_dataset(std::istream& in);

/// CSV: header `feature,0,1,...` then one row per feature.
void write_descriptors(std::ostream& out, const DescriptorMatrix& z);
DescriptorMatrix read_descriptors(std::istream& in);

/// CSV with `# seed=` and `# config=` comment lines, header `w_1..w_K,a,xi,sigma`, one row per
/// retained draw.
void write_chain(std::ostream& out, const PosteriorChain& chain);
PosteriorChain read_chain(std::istream& in);

/// Whole-file helpers; throw FormatError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

} // namespace elicit
