#include "hypercaps/importer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace hypercaps::importer {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_data_file(const fs::path& p) {
  const auto ext = lower(p.extension().string());
  return ext.empty() || ext == ".txt" || ext == ".tsv" || ext == ".csv";
}

// Split keyword found in a file stem, and the stem with it removed.
std::optional<std::pair<std::string, std::string>> classify_stem(const std::string& stem) {
  static const std::vector<std::pair<std::string, std::string>> keywords = {
      {"validation", "validation"}, {"valid", "validation"}, {"dev", "validation"}, {"val", "validation"},
      {"training", "train"},        {"train", "train"},      {"testing", "test"},   {"test", "test"}};
  const auto s = lower(stem);
  for (const auto& [kw, split] : keywords) {
    const auto pos = s.find(kw);
    if (pos == std::string::npos) continue;
    std::string rest = s.substr(0, pos) + s.substr(pos + kw.size());
    while (!rest.empty() && (rest.back() == '_' || rest.back() == '-' || rest.back() == '.' || rest.back() == ' ')) rest.pop_back();
    while (!rest.empty() && (rest.front() == '_' || rest.front() == '-' || rest.front() == '.' || rest.front() == ' ')) rest.erase(0, 1);
    return std::pair{split, rest};
  }
  return std::nullopt;
}

void scan_directory(const fs::path& dir, const std::string& dir_name, std::vector<CorpusSource>& found) {
  std::map<std::string, std::map<std::string, std::vector<fs::path>>> groups;
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_data_file(e.path())) entries.push_back(e.path());
  }
  std::sort(entries.begin(), entries.end());
  for (const auto& p : entries) {
    if (auto c = classify_stem(p.stem().string())) groups[c->second][c->first].push_back(p);
  }
  for (const auto& [key, splits] : groups) {
    if (!splits.count("train") || !splits.count("validation") || !splits.count("test")) continue;
    for (const auto& [split, files] : splits) {
      if (files.size() > 1) {
        throw corpus::CorpusError("ambiguous " + split + " files in " + dir.string() + ": " + files[0].filename().string() +
                                  ", " + files[1].filename().string());
      }
    }
    CorpusSource src;
    src.name = key.empty() ? dir_name : (dir_name.empty() ? key : dir_name + "_" + key);
    if (src.name.empty()) src.name = "corpus";
    src.files = {splits.at("train")[0], splits.at("validation")[0], splits.at("test")[0]};
    found.push_back(std::move(src));
  }
}

std::optional<Label> parse_label(std::string_view field) {
  const auto v = lower(std::string(trim(field)));
  if (v == "1" || v == "true" || v == "yes" || v == "positive" || v == "pos" || v == "1.0") return Label::positive;
  if (v == "0" || v == "false" || v == "no" || v == "negative" || v == "neg" || v == "-1" || v == "0.0") return Label::negative;
  return std::nullopt;
}

std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::vector<CorpusSource> detect_layout(const fs::path& src_dir) {
  if (!fs::is_directory(src_dir)) throw corpus::CorpusError("source directory " + src_dir.string() + " does not exist");
  std::vector<CorpusSource> found;
  scan_directory(src_dir, "", found);
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(src_dir)) {
    if (e.is_directory() && e.path().filename().string().front() != '.') subdirs.push_back(e.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& d : subdirs) scan_directory(d, lower(d.filename().string()), found);
  if (found.empty()) {
    throw corpus::CorpusError("unrecognized corpus layout in " + src_dir.string() +
                              ": expected train, validation (valid/val/dev) and test files (.txt/.tsv/.csv) "
                              "in the directory or in per-language subdirectories, e.g. English/train.txt, "
                              "English/valid.txt, English/test.txt");
  }
  return found;
}

std::vector<corpus::EntityPair> read_published_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw corpus::CorpusError("cannot open " + path.string());
  std::vector<corpus::EntityPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (line_no == 1 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (trim(view).empty() || trim(view).front() == '#') continue;

    auto fields = split_on(view, '\t');
    if (fields.size() != 3) fields = split_on(view, ',');
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (fields.size() != 3) {
      throw corpus::CorpusError(where + "expected two entities and a label, found " + std::to_string(fields.size()) + " fields");
    }
    corpus::EntityPair pair;
    if (auto label = parse_label(fields[2])) {
      pair = {std::string(trim(fields[0])), std::string(trim(fields[1])), *label};
    } else if (auto first = parse_label(fields[0])) {
      pair = {std::string(trim(fields[1])), std::string(trim(fields[2])), *first};
    } else if (!seen_data) {
      seen_data = true;  // header row
      continue;
    } else {
      throw corpus::CorpusError(where + "no recognisable label field");
    }
    if (pair.hypernym.empty() || pair.hyponym.empty()) throw corpus::CorpusError(where + "empty entity text");
    seen_data = true;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::string ImportReport::to_tsv() const {
  std::ostringstream os;
  os << "corpus\tsplit\tpositive\tnegative\tall\n";
  for (const auto& r : rows) {
    os << r.corpus << '\t' << r.split << '\t' << r.counts.positive << '\t' << r.counts.negative << '\t' << r.counts.all()
       << '\n';
  }
  return os.str();
}

ImportReport import_corpora(const fs::path& src_dir, const fs::path& out_dir) {
  const auto sources = detect_layout(src_dir);
  ImportReport report;
  fs::create_directories(out_dir);
  for (const auto& src : sources) {
    const auto dir = out_dir / src.name;
    fs::create_directories(dir);
    for (const auto& [split, path] : {std::pair{"train", src.files.train}, std::pair{"validation", src.files.validation},
                                      std::pair{"test", src.files.test}}) {
      const auto pairs = read_published_file(path);
      corpus::write_corpus(dir / (std::string(split) + ".tsv"), pairs);
      report.rows.push_back({src.name, split, corpus::count_labels(pairs)});
    }
  }
  std::ofstream stats(out_dir / "stats.tsv", std::ios::binary | std::ios::trunc);
  stats << report.to_tsv();
  return report;
}

}  // namespace hypercaps::importer
