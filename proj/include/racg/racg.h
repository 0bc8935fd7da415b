/* Copyright 2026 The racg Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the racg library.
 *
 * Every fallible call returns a racg_status. On failure the message is
 * available from racg_last_error() on the same thread until the next call.
 * Strings returned through char** are owned by the caller and released with
 * racg_free_string(). Configuration and results travel as JSON text.
 */

#ifndef RACG_RACG_H_
#define RACG_RACG_H_

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define RACG_API __declspec(dllexport)
#else
#define RACG_API __attribute__((visibility("default")))
#endif

typedef enum racg_status {
  RACG_OK = 0,
  RACG_ERR_USAGE = 1,
  RACG_ERR_DATA = 2,
  RACG_ERR_NUMERIC = 3,
  RACG_ERR_INTERNAL = 4
} racg_status;

typedef struct racg_dataset racg_dataset;
typedef struct racg_system racg_system;

RACG_API const char* racg_version(void);
RACG_API const char* racg_last_error(void);
RACG_API void racg_free_string(char* s);

/* Datasets */
RACG_API racg_status racg_dataset_synthetic(int num_templates, int samples_per_template,
                                            uint64_t seed, racg_dataset** out);
/* Raw record files; builds the vocabulary and dedups test against train. */
RACG_API racg_status racg_dataset_from_files(const char* train_path, const char* valid_path,
                                             const char* test_path, int min_freq,
                                             racg_dataset** out);
/* A prepared dataset directory. */
RACG_API racg_status racg_dataset_open(const char* dir, racg_dataset** out);
RACG_API racg_status racg_dataset_save(const racg_dataset* ds, const char* dir);
/* Split sizes, vocabulary size and hash, dropped sample counts. */
RACG_API racg_status racg_dataset_info(const racg_dataset* ds, char** json_out);
RACG_API void racg_dataset_free(racg_dataset* ds);

/* Training. config_json is an experiment config object (may be NULL or
 * "{}"); summary_json receives the best epoch and validation scores and may
 * be NULL. */
RACG_API racg_status racg_train(const racg_dataset* ds, const char* config_json,
                                const char* out_dir, char** summary_json);
/* The fully resolved experiment config for config_json, as JSON. */
RACG_API racg_status racg_resolve_config(const char* config_json, char** json_out);

/* Trained systems: a checkpoint directory or a variant manifest file. */
RACG_API racg_status racg_system_open(const char* path, racg_system** out);
RACG_API void racg_system_free(racg_system* sys);
/* {exemplar_id, exemplar_score, exemplar_comment, exemplar_code, prediction} */
RACG_API racg_status racg_predict(racg_system* sys, const char* code, int beam,
                                  char** result_json);
/* Scores one split ("train", "validation" or "test") of ds. predictions_jsonl
 * may be NULL. */
RACG_API racg_status racg_evaluate(racg_system* sys, const racg_dataset* ds, const char* split,
                                   int beam, char** report_json, char** predictions_jsonl);
/* Adds Wilcoxon p-values against each other report (a JSON array of
 * {name, report}) and returns the extended report. */
RACG_API racg_status racg_compare_reports(const char* report_json, const char* others_json,
                                          char** out_json);
/* Writes a variant manifest combining a retriever kind with checkpoints.
 * retriever_path may be NULL for lexical kinds. */
RACG_API racg_status racg_write_variant(const char* path, const char* retriever_kind,
                                        const char* retriever_path, const char* generator_path,
                                        uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif /* RACG_RACG_H_ */
