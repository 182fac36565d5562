#ifndef GNAT_H
#define GNAT_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum GnatStatus {
  GNAT_STATUS_OK = 0,
  GNAT_STATUS_NULL_POINTER = 1,
  GNAT_STATUS_INVALID_UTF8 = 2,
  GNAT_STATUS_INVALID_ARGUMENT = 3,
  GNAT_STATUS_IO = 4,
  GNAT_STATUS_FORMAT = 5,
  GNAT_STATUS_INSUFFICIENT_DATA = 6,
  GNAT_STATUS_NON_CONVERGENCE = 7,
  GNAT_STATUS_OUT_OF_RANGE = 8,
  GNAT_STATUS_PANIC = 9,
} GnatStatus;

typedef enum GnatScorer {
  GNAT_SCORER_JACCARD = 0,
  GNAT_SCORER_TFIDF_COSINE = 1,
  GNAT_SCORER_WORDVEC_MEAN_COSINE = 2,
  GNAT_SCORER_EMBEDDING_COSINE = 3,
  GNAT_SCORER_HAMMING = 4,
} GnatScorer;

typedef enum GnatGapMode {
  GNAT_GAP_MODE_LINEAR = 0,
  GNAT_GAP_MODE_AFFINE = 1,
} GnatGapMode;

// Where calibration statistics come from.
typedef enum GnatCalibration {
  // Estimated over the segments of both documents.
  GNAT_CALIBRATION_AUTO = 0,
  // The published embedding background; embedding cosine only.
  GNAT_CALIBRATION_BUILTIN = 1,
  // `calibration_mu`, `calibration_sigma` and `calibration_samples` from
  // the config.
  GNAT_CALIBRATION_EXPLICIT = 2,
} GnatCalibration;

typedef struct GnatAlignment GnatAlignment;

typedef struct GnatDocument GnatDocument;

typedef struct GnatEmbeddings GnatEmbeddings;

typedef struct GnatGumbel GnatGumbel;

typedef struct GnatWordVectors GnatWordVectors;

typedef struct GnatAlignConfig {
  enum GnatScorer scorer;
  double th_s;
  enum GnatGapMode gap_mode;
  double gap;
  double gap_open;
  double gap_extend;
  bool many_to_many;
  size_t max_alignments;
  enum GnatCalibration calibration;
  double calibration_mu;
  double calibration_sigma;
  // Number of scores behind an explicit background, at least 2.
  uint64_t calibration_samples;
  // Random pairs sampled by automatic calibration.
  size_t calibration_pairs;
  uint64_t seed;
  // Evaluate p-values at the pair's own lengths instead of the reference
  // lengths.
  bool length_correction;
} GnatAlignConfig;

// One extracted span, 0-based inclusive segment ranges.
typedef struct GnatSpan {
  size_t x_start;
  size_t x_end;
  size_t y_start;
  size_t y_end;
  double score;
  // NaN when the alignment was run without Gumbel parameters.
  double p_value;
} GnatSpan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static string.
const char *gnat_version(void);

// Message of the last failed call on this thread, or NULL. Valid until the
// next gnat call on the same thread.
const char *gnat_last_error(void);

void gnat_string_free(char *s);

// Segments `text` as document `id`. `unit` is `sentence` (when NULL),
// `paragraph`, `chunk:N` or `equal:M`.
enum GnatStatus gnat_document_from_text(const char *id,
                                        const char *text,
                                        const char *unit,
                                        struct GnatDocument **out);

// Loads and segments a UTF-8 file; the document id is the file stem.
enum GnatStatus gnat_document_load(const char *path, const char *unit, struct GnatDocument **out);

// Number of segments, 0 for NULL.
size_t gnat_document_len(const struct GnatDocument *doc);

void gnat_document_free(struct GnatDocument *doc);

enum GnatStatus gnat_embeddings_load(const char *path, struct GnatEmbeddings **out);

void gnat_embeddings_free(struct GnatEmbeddings *table);

enum GnatStatus gnat_word_vectors_load(const char *path, struct GnatWordVectors **out);

void gnat_word_vectors_free(struct GnatWordVectors *table);

struct GnatAlignConfig gnat_align_config_default(void);

// Aligns `a` against `b`. `config` NULL means defaults; `embeddings` and
// `word_vectors` are needed only by their scorers; with `gumbel` the result
// carries p-values.
enum GnatStatus gnat_align(const struct GnatDocument *a,
                           const struct GnatDocument *b,
                           const struct GnatAlignConfig *config,
                           const struct GnatEmbeddings *embeddings,
                           const struct GnatWordVectors *word_vectors,
                           const struct GnatGumbel *gumbel,
                           struct GnatAlignment **out);

// Best local alignment score, NaN for NULL.
double gnat_alignment_max_score(const struct GnatAlignment *al);

// Number of spans, best first; 0 for NULL.
size_t gnat_alignment_span_count(const struct GnatAlignment *al);

enum GnatStatus gnat_alignment_span(const struct GnatAlignment *al,
                                    size_t index,
                                    struct GnatSpan *out);

// Canonical JSON of the alignment result; free with [`gnat_string_free`].
enum GnatStatus gnat_alignment_to_json(const struct GnatAlignment *al, char **out);

void gnat_alignment_free(struct GnatAlignment *al);

enum GnatStatus gnat_gumbel_from_location_scale(double mu,
                                                double beta,
                                                double m_ref,
                                                double n_ref,
                                                struct GnatGumbel **out);

// Maximum-likelihood Gumbel fit to `len` positive null scores observed at
// reference lengths `m_ref` × `n_ref`.
enum GnatStatus gnat_gumbel_fit(const double *scores,
                                size_t len,
                                double m_ref,
                                double n_ref,
                                struct GnatGumbel **out);

// Reads Gumbel parameters JSON as written by `gnat fit-null`.
enum GnatStatus gnat_gumbel_load(const char *path, struct GnatGumbel **out);

// Copies the parameters out; any output pointer may be NULL.
enum GnatStatus gnat_gumbel_params(const struct GnatGumbel *g,
                                   double *mu,
                                   double *beta,
                                   double *lambda,
                                   double *k);

void gnat_gumbel_free(struct GnatGumbel *g);

// Probability of a chance alignment scoring at least `score` between
// documents of `m` and `n` segments; 0 selects the reference length.
enum GnatStatus gnat_p_value(const struct GnatGumbel *g,
                             double score,
                             double m,
                             double n,
                             double *out);

// Maps a raw score to the calibrated range (−1, 1) given its background
// mean and standard deviation.
enum GnatStatus gnat_calibrate(double raw, double mu, double sigma, double th_s, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GNAT_H */
