#ifndef MGNR_H
#define MGNR_H

/* C interface to the multi-grid neural video codec. Every function
 * returns one of the MGNR_* codes below; on failure, mgnr_last_error()
 * holds a message for the calling thread until the next call. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define MGNR_OK 0
#define MGNR_E_IO 1
#define MGNR_E_CONFIG 2
#define MGNR_E_NUMERIC 3
#define MGNR_E_BITSTREAM 4

const char* mgnr_last_error(void);

typedef struct {
  double bpp;
  double psnr; /* +inf when the inputs are identical */
  double ssim;
  double seconds;
} mgnr_stats;

/* Train a model on the PPM sequence under input_dir (layout
 * v{view:02}/f{frame:04}.ppm), compress it, and write the container to
 * output_path plus a per-epoch CSV at "<output_path>.train.csv".
 * config_text holds newline-separated key=value pairs; NULL or empty
 * selects the defaults. stats may be NULL. */
int mgnr_encode(const char* input_dir, const char* config_text, const char* output_path,
                mgnr_stats* stats);

/* A parsed and CRC-validated container. */
typedef struct mgnr_stream mgnr_stream;

int mgnr_stream_open(const char* path, mgnr_stream** out);
void mgnr_stream_close(mgnr_stream* stream);

/* Render every frame into output_dir using the PPM sequence layout. */
int mgnr_stream_decode(mgnr_stream* stream, const char* output_dir);

/* Header fields and per-tensor sizes as printable text. Writes up to
 * buflen bytes (always NUL-terminated when buflen > 0) and stores the
 * full length including the NUL in *needed when needed is non-NULL. */
int mgnr_stream_info(mgnr_stream* stream, char* buf, size_t buflen, size_t* needed);

/* Per-frame metric callback used by mgnr_eval. */
typedef void (*mgnr_frame_stat_fn)(int view, int frame, double psnr, double ssim, void* user);

/* Compare two sequence directories. bitstream_path supplies the rate
 * (stats->bpp is 0 when it is NULL); on_frame may be NULL. */
int mgnr_eval(const char* recon_dir, const char* source_dir, const char* bitstream_path,
              mgnr_frame_stat_fn on_frame, void* user, mgnr_stats* stats);

/* Bjontegaard delta rate between two `bpp,psnr,ssim` CSV files.
 * key is "psnr" or "ssim". */
int mgnr_bd_rate(const char* anchor_csv, const char* test_csv, const char* key,
                 double* out_percent);

/* Generate a synthetic multi-view sequence from a key=value spec file
 * (NULL spec_path selects the defaults) into output_dir; ground-truth
 * motion masks land in output_dir/masks as PGM. */
int mgnr_synth(const char* spec_path, const char* output_dir);

#ifdef __cplusplus
}
#endif

#endif /* MGNR_H */
