#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scenebench/metrics.hpp"

namespace scenebench {

/// One four-to-one question: an original image and four generated candidates
/// in canonical order (candidate i always comes from models[i]).
struct StudyTask {
  std::string task_id;
  std::string original;
  std::array<std::string, 4> candidates;
  /// SGScore of each candidate, when known; drives the machine choice.
  std::optional<std::array<double, 4>> sgscores;
  /// Screen position p shows candidate display_order[p]. Seeded per task and
  /// shared by all annotators.
  std::array<int, 4> display_order{0, 1, 2, 3};
};

struct StudySpec {
  /// Hidden model labels, canonical order. Never sent over HTTP.
  std::array<std::string, 4> models;
  std::uint64_t seed = 0;
  /// Image paths in tasks resolve against this directory.
  std::filesystem::path images_root;
  std::vector<StudyTask> tasks;
};

/// Seeded permutation of 0..3 for a task.
std::array<int, 4> study_display_order(std::uint64_t seed, std::string_view task_id);

/// Parses a tasks file:
/// {"models": [4 names], "seed": n, "images_root": "dir",
///  "tasks": [{"task_id", "original", "candidates": [4 paths], "sgscores": [4 reals]?}]}
/// A relative images_root resolves against `base_dir`. Throws ParseError /
/// StructuralError (duplicate task ids, candidate count != 4).
StudySpec parse_study_spec(std::string_view json_text, const std::filesystem::path& base_dir = {});
StudySpec load_study_spec(const std::filesystem::path& path);

struct StudyResponse {
  std::string task_id;
  std::string annotator_id;
  int displayed_choice = 0;
  /// display_order[displayed_choice]
  int resolved_choice = 0;
  std::string timestamp;

  bool operator==(const StudyResponse&) const = default;
};

std::string study_response_to_json(const StudyResponse& r);
StudyResponse study_response_from_json(std::string_view line);

/// Canonical candidate index picked at screen position `displayed`.
int resolve_choice(const std::array<int, 4>& display_order, int displayed);

enum class SubmitStatus { Accepted, Duplicate, UnknownTask, InvalidChoice };

/// Server-side study state: per-annotator progress and the append-only
/// response log. All members are safe to call concurrently.
class StudyState {
 public:
  /// Replays `responses_path` if it exists (a torn final line is ignored) and
  /// appends new responses to it.
  StudyState(StudySpec spec, std::filesystem::path responses_path);

  /// UI payload for the lowest-index task `annotator` has not answered:
  /// {"done": false, "task_id", "original_url", "candidate_urls": [4], "progress": {answered, total}}
  /// or {"done": true, "progress": ...}. Contains no model labels or canonical indices.
  std::string next_task_json(const std::string& annotator) const;

  std::pair<SubmitStatus, std::optional<StudyResponse>> submit(const std::string& task_id,
                                                               const std::string& annotator, int displayed_choice);

  std::vector<StudyResponse> responses() const;
  /// Human choice vs machine choice over responses whose task has scores.
  /// Labels are the canonical indices "0".."3".
  ConfusionMatrix confusion() const;
  /// {"responses": [...], "confusion": {"cells": 4x4, "total": n}, "unscored": k}
  std::string export_json() const;

  /// File for a UI image slot: "original" or a screen position "0".."3".
  std::optional<std::filesystem::path> image_path(const std::string& task_id, const std::string& slot) const;

  const StudySpec& spec() const noexcept { return spec_; }

 private:
  const StudyTask* find(const std::string& task_id) const;
  std::size_t answered_count(const std::string& annotator) const;

  StudySpec spec_;
  std::map<std::string, std::size_t> index_;
  mutable std::mutex mutex_;
  std::vector<StudyResponse> responses_;
  std::set<std::pair<std::string, std::string>> answered_;  // (annotator, task)
  std::ofstream log_;
};

/// Confusion matrix with model labels, for offline reports.
ConfusionMatrix study_confusion(const StudySpec& spec, const std::vector<StudyResponse>& responses);

/// HTTP front end: static UI assets plus the JSON API
///   GET  /api/tasks/next?annotator=ID
///   POST /api/responses          {task_id, annotator_id, displayed_choice}
///   GET  /api/export
///   GET  /api/images/<task_id>/<slot>
class StudyServer {
 public:
  StudyServer(std::shared_ptr<StudyState> state, std::filesystem::path static_dir = {});
  ~StudyServer();
  StudyServer(const StudyServer&) = delete;
  StudyServer& operator=(const StudyServer&) = delete;

  /// Binds host:port (0 picks a free port), serves on a background thread and
  /// returns the bound port. Throws ConfigError when binding fails.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop().
  void listen_blocking(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace scenebench
