// Copyright 2026 The freqdet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// freqdet: inspect, extract, verify, evaluate, estimate and benchmark.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "freqdet.hpp"
#include "freqdet/reference/libjpeg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace freqdet::cli {
namespace {

enum ExitCode { kOk = 0, kUsage = 1, kDecode = 2, kUnsupported = 3 };

// FREQDET_LOG=error|warn|info|debug (default warn).
enum class LogLevel { kOff, kError, kWarn, kInfo, kDebug };

LogLevel ParseLogLevel() {
  const char* v = std::getenv("FREQDET_LOG");
  if (v == nullptr) return LogLevel::kWarn;
  const std::string s = v;
  if (s == "off" || s == "0") return LogLevel::kOff;
  if (s == "error") return LogLevel::kError;
  if (s == "info") return LogLevel::kInfo;
  if (s == "debug" || s == "1") return LogLevel::kDebug;
  return LogLevel::kWarn;
}

const LogLevel g_log_level = ParseLogLevel();

void Log(LogLevel level, const std::string& msg) {
  if (level > g_log_level) return;
  static const char* names[] = {"", "error", "warn", "info", "debug"};
  std::cerr << "[freqdet " << names[static_cast<int>(level)] << "] " << msg << "\n";
}

int ExitCodeFor(ErrorKind k) {
  switch (k) {
    case ErrorKind::kUnsupportedMode:
      return kUnsupported;
    case ErrorKind::kMissingSOI:
    case ErrorKind::kTruncatedSegment:
    case ErrorKind::kMissingFrame:
    case ErrorKind::kMissingTable:
    case ErrorKind::kInvalidCodeCounts:
    case ErrorKind::kHuffmanOverrun:
    case ErrorKind::kBadRestartMarker:
    case ErrorKind::kCorruptData:
    case ErrorKind::kShapeMismatch:
      return kDecode;
    default:
      return kUsage;
  }
}

void Emit(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  const std::string text = j.dump(2) + "\n";
  WriteFileBytes(out_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  Log(LogLevel::kInfo, "wrote " + out_path);
}

json ReadJson(const std::string& path) {
  const auto bytes = ReadFileBytes(path);
  json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::kFormat, path + ": invalid JSON");
  return j;
}

ResampleMode ParseResample(const std::string& s) {
  return s == "bilinear" ? ResampleMode::kBilinear : ResampleMode::kReplicate;
}

// Files as given; directories contribute their *.jpg / *.jpeg entries.
std::vector<std::string> ExpandInputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> out;
  for (const auto& in : inputs) {
    if (!fs::is_directory(in)) {
      out.push_back(in);
      continue;
    }
    std::vector<std::string> found;
    for (const auto& e : fs::directory_iterator(in)) {
      std::string ext = e.path().extension().string();
      for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (e.is_regular_file() && (ext == ".jpg" || ext == ".jpeg")) found.push_back(e.path().string());
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

std::vector<std::uint8_t> ReadJpeg(const std::string& path) {
  Log(LogLevel::kDebug, "reading " + path);
  return ReadFileBytes(path);
}

// --------------------------------------------------------------------------
// info

std::string SamplingString(const FrameHeader& f) {
  std::string s;
  for (std::size_t i = 0; i < f.components.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(f.components[i].h_sampling) + "x" + std::to_string(f.components[i].v_sampling);
  }
  return s;
}

json StructureJson(const JpegStructure& s) {
  json comps = json::array();
  for (const auto& c : s.frame.components) {
    comps.push_back({{"id", c.id}, {"h", c.h_sampling}, {"v", c.v_sampling}, {"quant_table", c.quant_table_id}});
  }
  json markers = json::array();
  for (const auto& m : s.markers) {
    markers.push_back({{"marker", MarkerName(m.code)}, {"offset", m.offset}, {"length", m.length}});
  }
  return {{"width", s.frame.width},
          {"height", s.frame.height},
          {"precision", s.frame.precision},
          {"sof", MarkerName(s.frame.sof_marker)},
          {"components", comps},
          {"sampling", SamplingString(s.frame)},
          {"quant_tables", s.quant_tables.size()},
          {"huffman_tables", s.huffman_tables.size()},
          {"restart_interval", s.restart_interval},
          {"scans", s.scans.size()},
          {"markers", markers}};
}

int CmdInfo(const std::string& path, bool as_json) {
  const JpegStructure s = parse_stream(ReadJpeg(path));
  const json j = StructureJson(s);
  if (as_json) {
    std::cout << j.dump(2) << "\n";
    return kOk;
  }
  std::cout << path << "\n"
            << "size " << s.frame.width << "x" << s.frame.height << "\n"
            << "components " << s.frame.components.size() << "\n"
            << "sampling " << SamplingString(s.frame) << "\n"
            << "quant tables " << s.quant_tables.size() << "\n"
            << "huffman tables " << s.huffman_tables.size() << "\n"
            << "restart interval " << s.restart_interval << "\n"
            << "scans " << s.scans.size() << "\n"
            << "markers";
  for (const auto& m : s.markers) std::cout << " " << MarkerName(m.code) << "@" << m.offset;
  std::cout << "\n";
  return kOk;
}

// --------------------------------------------------------------------------
// extract / stats

int CmdExtract(const std::string& in, const std::string& out, const std::string& stats_path,
               const std::string& resample) {
  ExtractOptions opts;
  opts.resample = ParseResample(resample);
  if (!stats_path.empty()) opts.normalization = load_stats(stats_path);
  const DctTensor t = extract_dct_tensor(ReadJpeg(in), opts);
  save_dctt(out, t);
  Log(LogLevel::kInfo, "wrote " + out + " (" + std::to_string(t.rows()) + "x" +
                           std::to_string(t.cols()) + "x" + std::to_string(t.channels()) + ")");
  std::cout << json{{"rows", t.rows()}, {"cols", t.cols()}, {"channels", t.channels()}}.dump() << "\n";
  return kOk;
}

int CmdStats(const std::vector<std::string>& inputs, const std::string& out,
             const std::string& resample, std::size_t workers) {
  const auto files = ExpandInputs(inputs);
  if (files.empty()) throw Error(ErrorKind::kEmptyCorpus, "no input images");
  workers = std::max<std::size_t>(1, std::min(workers, files.size()));
  ExtractOptions opts;
  opts.resample = ParseResample(resample);
  std::vector<StatsAccumulator> partial(workers, StatsAccumulator(kDctChannels));
  detail::ParallelFor(workers, workers, [&](std::size_t w) {
    for (std::size_t i = w; i < files.size(); i += workers) {
      partial[w].add(extract_dct_tensor(ReadJpeg(files[i]), opts));
    }
  });
  for (std::size_t w = 1; w < workers; ++w) partial[0].merge(partial[w]);
  const NormStats s = partial[0].finish();
  save_stats(out, s);
  Log(LogLevel::kInfo, "stats over " + std::to_string(files.size()) + " images");
  return kOk;
}

// --------------------------------------------------------------------------
// roundtrip

int CmdRoundtrip(const std::vector<std::string>& inputs, const std::string& resample, bool as_json) {
  const auto files = ExpandInputs(inputs);
  if (files.empty()) throw Error(ErrorKind::kEmptyCorpus, "no input images");
  json report = json::array();
  for (const auto& path : files) {
    const auto bytes = ReadJpeg(path);
    const Image8 ours = full_decode(bytes, ParseResample(resample));
    const Image8 ref = reference::decode(bytes);
    if (ours.width != ref.width || ours.height != ref.height || ours.channels != ref.channels) {
      throw Error(ErrorKind::kShapeMismatch, path + ": decoded size differs from reference");
    }
    int max_abs = 0;
    std::size_t within = 0;
    long long total = 0;
    for (std::size_t i = 0; i < ours.data.size(); ++i) {
      const int e = std::abs(int{ours.data[i]} - int{ref.data[i]});
      max_abs = std::max(max_abs, e);
      within += e <= 1;
      total += e;
    }
    const double n = static_cast<double>(ours.data.size());
    report.push_back({{"file", path},
                      {"samples", ours.data.size()},
                      {"max_abs_error", max_abs},
                      {"mean_abs_error", static_cast<double>(total) / n},
                      {"within_one_fraction", static_cast<double>(within) / n}});
  }
  if (as_json) {
    std::cout << report.dump(2) << "\n";
  } else {
    for (const auto& r : report) {
      std::cout << r["file"].get<std::string>() << ": max " << r["max_abs_error"] << " mean "
                << std::setprecision(4) << r["mean_abs_error"].get<double>() << " within1 "
                << r["within_one_fraction"].get<double>() << "\n";
    }
  }
  return kOk;
}

// --------------------------------------------------------------------------
// eval

std::vector<double> ParseEdges(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kInvalidArgument, "bad bucket edge '" + tok + "'");
    }
  }
  return out;
}

int CmdEval(const std::string& gt_path, const std::string& det_path, double iou_threshold,
            const std::string& buckets, bool continuous, bool legacy, const std::string& out) {
  const auto gts = ground_truth_from_json(ReadJson(gt_path));
  const auto dets = detections_from_json(ReadJson(det_path));
  EvalOptions opts;
  opts.match.iou_threshold = iou_threshold;
  opts.match.area = legacy ? AreaConvention::kLegacyPlusOne : AreaConvention::kContinuous;
  opts.method = continuous ? ApMethod::kContinuous : ApMethod::kElevenPoint;
  opts.bucket_edges = ParseEdges(buckets);
  Log(LogLevel::kInfo, std::to_string(gts.size()) + " ground truth, " + std::to_string(dets.size()) +
                           " detections");
  json j = to_json(evaluate(gts, dets, opts));
  j["method"] = continuous ? "continuous" : "11point";
  j["iou_threshold"] = iou_threshold;
  Emit(j, out);
  return kOk;
}

// --------------------------------------------------------------------------
// flops

ArchSpec SelectArch(const std::string& arch) {
  if (arch == "ssd300") return ssd300_spec();
  if (arch == "ssd_freq") return ssd_freq_spec();
  if (!fs::exists(arch)) {
    throw Error(ErrorKind::kInvalidArgument,
                "--arch must be ssd300, ssd_freq or an existing spec file: " + arch);
  }
  return arch_from_json(ReadJson(arch));
}

int CmdFlops(const std::string& arch, const std::string& convention, bool breakdown) {
  const FlopsConvention c =
      convention == "x2" ? FlopsConvention::kMultiplyAddAsTwo : FlopsConvention::kMultiplyAccumulate;
  const ArchSpec a = SelectArch(arch);
  const auto layers = flops_breakdown(a, c);
  std::uint64_t total = 0;
  for (const auto& l : layers) total += l.flops;
  const std::uint64_t baseline = estimate_flops(ssd300_spec(), c);
  json j = {{"arch", a.name},
            {"flops", total},
            {"gflops", static_cast<double>(total) / 1e9},
            {"flops_convention", FlopsConventionName(c)},
            {"baseline", "ssd300"},
            {"baseline_flops", baseline},
            {"ratio_to_baseline", total == 0 ? 0.0 : static_cast<double>(baseline) / static_cast<double>(total)}};
  if (breakdown) {
    json per = json::array();
    for (const auto& l : layers) {
      per.push_back({{"name", l.name},
                     {"output", {l.output.rows, l.output.cols, l.output.channels}},
                     {"flops", l.flops}});
    }
    j["layers"] = per;
  }
  std::cout << j.dump(2) << "\n";
  return kOk;
}

// --------------------------------------------------------------------------
// bench

int CmdBenchDecode(const std::vector<std::string>& inputs, const std::string& mode, std::size_t reps,
                   std::size_t workers, const std::string& out) {
  const auto files = ExpandInputs(inputs);
  std::vector<CorpusItem> corpus;
  for (const auto& f : files) corpus.push_back({f, ReadJpeg(f)});
  Log(LogLevel::kInfo, "preloaded " + std::to_string(corpus.size()) + " images");
  json j;
  if (mode == "both") {
    const BenchReport partial = bench_decode(corpus, DecodeMode::kPartial, reps, workers);
    const BenchReport full = bench_decode(corpus, DecodeMode::kFull, reps, workers);
    j = {{"partial", to_json(partial)},
         {"full", to_json(full)},
         {"ratio", partial.items_per_sec_mean / full.items_per_sec_mean}};
  } else {
    j = to_json(bench_decode(corpus, mode == "full" ? DecodeMode::kFull : DecodeMode::kPartial, reps, workers));
  }
  Emit(j, out);
  return kOk;
}

int CmdBenchForward(const std::string& weights, std::size_t batch_size, std::size_t batch_count,
                    std::size_t reps, std::size_t workers, std::uint64_t seed, const std::string& out) {
  json j;
  if (!weights.empty()) {
    j = to_json(bench_forward(load_weights<float>(weights), batch_size, batch_count, reps, workers, seed));
  } else {
    const DeskConfig cfg;
    const BenchReport freq = bench_forward(make_desk_network<float>(InputDomain::kFrequency, cfg, seed),
                                           batch_size, batch_count, reps, workers, seed);
    const BenchReport pixel = bench_forward(make_desk_network<float>(InputDomain::kPixel, cfg, seed),
                                            batch_size, batch_count, reps, workers, seed);
    j = {{"frequency", to_json(freq)},
         {"pixel", to_json(pixel)},
         {"ratio", freq.items_per_sec_mean / pixel.items_per_sec_mean}};
  }
  Emit(j, out);
  return kOk;
}

// --------------------------------------------------------------------------
// weights

int CmdWeights(const std::string& out, const std::string& domain, std::size_t input_size,
               std::size_t classes, std::uint64_t seed) {
  DeskConfig cfg;
  cfg.input_size = input_size;
  cfg.num_classes = classes;
  const auto net = make_desk_network<float>(
      domain == "pixel" ? InputDomain::kPixel : InputDomain::kFrequency, cfg, seed);
  save_weights(out, net);
  Log(LogLevel::kInfo, "wrote " + out);
  return kOk;
}

int Run(int argc, char** argv) {
  CLI::App app{"Frequency-domain detection toolkit: JPEG DCT extraction, VOC evaluation, FLOPs and benchmarks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "freqdet 0.1.0");

  std::string path, out, stats_path, resample = "replicate";
  std::vector<std::string> inputs;
  bool as_json = false;

  auto* info = app.add_subcommand("info", "Summarize a JPEG's markers, frame and tables");
  info->add_option("file", path, "JPEG file")->required()->check(CLI::ExistingFile);
  info->add_flag("--json", as_json, "Machine-readable output");

  auto* extract = app.add_subcommand("extract", "Write the DCT tensor of a JPEG as a DCTT file");
  extract->add_option("file", path, "JPEG file")->required()->check(CLI::ExistingFile);
  extract->add_option("-o,--output", out, "Output DCTT path")->required();
  extract->add_option("--normalize", stats_path, "Stats file to normalize with")->check(CLI::ExistingFile);
  extract->add_option("--resample", resample, "Chroma upsampling")
      ->check(CLI::IsMember({"replicate", "bilinear"}));

  std::size_t workers = 1;
  auto* stats = app.add_subcommand("stats", "Compute per-channel normalization stats over a corpus");
  stats->add_option("inputs", inputs, "JPEG files or directories")->required()->check(CLI::ExistingPath);
  stats->add_option("-o,--output", out, "Output stats JSON")->required();
  stats->add_option("--resample", resample)->check(CLI::IsMember({"replicate", "bilinear"}));
  stats->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* roundtrip = app.add_subcommand("roundtrip", "Full decode vs the libjpeg reference decoder");
  roundtrip->add_option("inputs", inputs, "JPEG files or directories")->required()->check(CLI::ExistingPath);
  roundtrip->add_option("--resample", resample)->check(CLI::IsMember({"replicate", "bilinear"}));
  roundtrip->add_flag("--json", as_json);

  std::string gt_path, det_path, buckets = "45,85,135,250";
  double iou_threshold = 0.5;
  bool continuous = false, eleven = false, legacy = false;
  auto* eval = app.add_subcommand("eval", "VOC AP / mAP and size-bucket report");
  eval->add_option("--gt", gt_path, "Ground-truth JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--det", det_path, "Detections JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--iou", iou_threshold, "Match IoU threshold")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--buckets", buckets, "Comma-separated bucket edges (side length, pixels)");
  auto* cont_flag = eval->add_flag("--continuous", continuous, "Area under the precision envelope");
  auto* eleven_flag = eval->add_flag("--eleven-point", eleven, "11-point interpolation (default)");
  cont_flag->excludes(eleven_flag);
  eval->add_flag("--legacy-area", legacy, "Inclusive pixel corners (+1) for areas");
  eval->add_option("-o,--output", out, "Write the report here instead of stdout");

  std::string arch, convention = "mac";
  bool breakdown = false;
  auto* flops = app.add_subcommand("flops", "Analytic FLOPs estimate");
  flops->add_option("--arch", arch, "ssd300, ssd_freq or an arch spec JSON file")->required();
  flops->add_option("--convention", convention, "mac: multiply-add = 1; x2: multiply-add = 2")
      ->check(CLI::IsMember({"mac", "x2"}));
  flops->add_flag("--layers", breakdown, "Per-layer breakdown");

  std::size_t reps = 10, batch_size = 8, batch_count = 619;
  std::uint64_t seed = 1;
  std::string mode = "both", weights;
  auto* bench = app.add_subcommand("bench", "Throughput benchmarks");
  bench->require_subcommand(1);
  auto* bench_decode_cmd = bench->add_subcommand("decode", "Partial vs full decode over a preloaded corpus");
  bench_decode_cmd->add_option("inputs", inputs, "JPEG files or directories")->required()->check(CLI::ExistingPath);
  bench_decode_cmd->add_option("--mode", mode)->check(CLI::IsMember({"partial", "full", "both"}));
  bench_decode_cmd->add_option("--repetitions", reps)->check(CLI::PositiveNumber);
  bench_decode_cmd->add_option("--workers", workers)->check(CLI::PositiveNumber);
  bench_decode_cmd->add_option("-o,--output", out);
  auto* bench_forward_cmd = bench->add_subcommand("forward", "Forward-pass throughput");
  bench_forward_cmd->add_option("--weights", weights, "Weights manifest (default: both desk networks)")
      ->check(CLI::ExistingFile);
  bench_forward_cmd->add_option("--batch-size", batch_size)->check(CLI::PositiveNumber);
  bench_forward_cmd->add_option("--batch-count", batch_count)->check(CLI::PositiveNumber);
  bench_forward_cmd->add_option("--repetitions", reps)->check(CLI::PositiveNumber);
  bench_forward_cmd->add_option("--workers", workers)->check(CLI::PositiveNumber);
  bench_forward_cmd->add_option("--seed", seed);
  bench_forward_cmd->add_option("-o,--output", out);

  std::string domain = "frequency";
  std::size_t input_size = 128, classes = 3;
  auto* weights_cmd = app.add_subcommand("weights", "Write seeded desk-network weights");
  weights_cmd->add_option("-o,--output", out, "Manifest path; the blob goes next to it as .bin")->required();
  weights_cmd->add_option("--domain", domain)->check(CLI::IsMember({"frequency", "pixel"}));
  weights_cmd->add_option("--input-size", input_size)->check(CLI::PositiveNumber);
  weights_cmd->add_option("--classes", classes)->check(CLI::PositiveNumber);
  weights_cmd->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*info) return CmdInfo(path, as_json);
    if (*extract) return CmdExtract(path, out, stats_path, resample);
    if (*stats) return CmdStats(inputs, out, resample, workers);
    if (*roundtrip) return CmdRoundtrip(inputs, resample, as_json);
    if (*eval) return CmdEval(gt_path, det_path, iou_threshold, buckets, continuous, legacy, out);
    if (*flops) return CmdFlops(arch, convention, breakdown);
    if (*bench_decode_cmd) return CmdBenchDecode(inputs, mode, reps, workers, out);
    if (*bench_forward_cmd) {
      return CmdBenchForward(weights, batch_size, batch_count, reps, workers, seed, out);
    }
    if (*weights_cmd) return CmdWeights(out, domain, input_size, classes, seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace
}  // namespace freqdet::cli

int main(int argc, char** argv) { return freqdet::cli::Run(argc, argv); }
