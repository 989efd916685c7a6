#ifndef MOTIONPILOT_H
#define MOTIONPILOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Largest payload a CRSF frame can carry.
 */
#define MP_MAX_PAYLOAD_LEN 60

/**
 * Number of channel values read or written by the channel functions.
 */
#define MP_CHANNEL_COUNT 16

typedef enum MpStatus {
  MP_STATUS_OK = 0,
  MP_STATUS_NULL_POINTER = 1,
  MP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Frame failed its CRC or length checks.
   */
  MP_STATUS_BAD_FRAME = 3,
  MP_STATUS_BUFFER_TOO_SMALL = 4,
  /**
   * Config or data text could not be parsed or validated.
   */
  MP_STATUS_INVALID_CONFIG = 5,
  MP_STATUS_IO = 6,
  /**
   * Nothing queued; not an error.
   */
  MP_STATUS_EMPTY = 7,
  /**
   * The simulator session has already ended.
   */
  MP_STATUS_ENDED = 8,
  MP_STATUS_INTERNAL = 99,
} MpStatus;

typedef enum MpArmMode {
  MP_ARM_MODE_DISARMED = 0,
  MP_ARM_MODE_ARMED = 1,
  MP_ARM_MODE_FAILSAFE = 2,
} MpArmMode;

/**
 * Why a simulator session ended.
 */
typedef enum MpEndReason {
  MP_END_REASON_RUNNING = 0,
  MP_END_REASON_EXERCISE_COMPLETED = 1,
  MP_END_REASON_EXERCISE_FAILED = 2,
  MP_END_REASON_INPUT_ENDED = 3,
  MP_END_REASON_STOPPED = 4,
  MP_END_REASON_DISCONNECTED = 5,
  MP_END_REASON_TIMEOUT = 6,
  MP_END_REASON_FAULT = 7,
} MpEndReason;

/**
 * Controller → channels pipeline with arming and slew limiting.
 */
typedef struct MpMapper MpMapper;

/**
 * Streaming CRSF parser with a queue of decoded frames.
 */
typedef struct MpParser MpParser;

/**
 * A whole session: mapping, lossy link, receiver, flight controller,
 * dynamics and the optional exercise script. Records every step.
 */
typedef struct MpSim MpSim;

/**
 * One CRC-valid frame taken from a parser.
 */
typedef struct MpFrame {
  uint8_t frame_type;
  uint8_t payload_len;
  uint8_t payload[MP_MAX_PAYLOAD_LEN];
} MpFrame;

typedef struct MpParserStats {
  uint64_t frames;
  uint64_t crc_errors;
  uint64_t resyncs;
  uint64_t skipped_unknown;
} MpParserStats;

/**
 * One handheld controller reading.
 */
typedef struct MpControllerState {
  /**
   * Trigger travel, 0 released to 1 fully pulled.
   */
  double trigger;
  /**
   * Forward tilt in degrees.
   */
  double tilt_pitch;
  /**
   * Rightward tilt in degrees.
   */
  double tilt_roll;
  /**
   * -1..1, right positive.
   */
  double thumbstick_x;
  bool arm_button;
  uint64_t timestamp_ms;
} MpControllerState;

/**
 * Vehicle and link state after a simulator step. World frame is x forward,
 * y left, z up, metres.
 */
typedef struct MpSimState {
  uint64_t t_ms;
  double position[3];
  double velocity[3];
  /**
   * w, x, y, z
   */
  double attitude[4];
  bool armed;
  bool failsafe;
  /**
   * Percent over the last 100 packets.
   */
  uint8_t link_quality;
  enum MpEndReason ended;
} MpSimState;

typedef struct MpScaleScore {
  double mean;
  double sd;
} MpScaleScore;

typedef struct MpUeqScales {
  struct MpScaleScore pragmatic;
  struct MpScaleScore hedonic;
  struct MpScaleScore overall;
  size_t participants;
} MpUeqScales;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message on this thread into `buf` (NUL-terminated,
 * truncated to fit) and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t mp_last_error(char *buf, size_t len);

/**
 * CRC8 DVB-S2 over `len` bytes.
 *
 * # Safety
 * `data` must point to `len` readable bytes (or be null when `len` is 0).
 */
uint8_t mp_crc8(const uint8_t *data, size_t len);

/**
 * Encodes 16 channel values (ticks, 0..=2047) into a 26-byte RC frame.
 *
 * # Safety
 * `channels` must point to 16 values; `out` to `out_len` writable bytes.
 */
enum MpStatus mp_encode_rc(const uint16_t *channels, uint8_t *out, size_t out_len, size_t *written);

/**
 * Decodes a complete RC frame into 16 channel values.
 *
 * # Safety
 * `frame` must point to `len` bytes; `channels_out` to 16 writable values.
 */
enum MpStatus mp_decode_rc(const uint8_t *frame, size_t len, uint16_t *channels_out);

struct MpParser *mp_parser_new(void);

/**
 * # Safety
 * `parser` must come from [`mp_parser_new`] and not be used afterwards.
 */
void mp_parser_free(struct MpParser *parser);

/**
 * Feeds bytes in any chunking; complete frames are queued.
 *
 * # Safety
 * `parser` must be a live handle; `data` must point to `len` bytes.
 */
enum MpStatus mp_parser_feed(struct MpParser *parser, const uint8_t *data, size_t len);

/**
 * Pops the oldest queued frame, or returns `Empty`.
 *
 * # Safety
 * `parser` must be a live handle; `out` must be writable.
 */
enum MpStatus mp_parser_next(struct MpParser *parser, struct MpFrame *out);

/**
 * # Safety
 * `parser` must be a live handle; `out` must be writable.
 */
enum MpStatus mp_parser_stats(const struct MpParser *parser, struct MpParserStats *out);

/**
 * Decodes an RC frame taken from the parser into 16 channel values.
 *
 * # Safety
 * `frame` must be readable; `channels_out` must hold 16 values.
 */
enum MpStatus mp_frame_channels(const struct MpFrame *frame, uint16_t *channels_out);

/**
 * Creates a mapper from a mapping config in TOML (null for defaults) and
 * neutral tilt offsets in degrees.
 *
 * # Safety
 * `config_toml` must be null or a NUL-terminated string; `out` writable.
 */
enum MpStatus mp_mapper_new(const char *config_toml,
                            double offset_pitch,
                            double offset_roll,
                            struct MpMapper **out);

/**
 * # Safety
 * `mapper` must come from [`mp_mapper_new`] and not be used afterwards.
 */
void mp_mapper_free(struct MpMapper *mapper);

/**
 * Maps one reading to 16 channel values and reports the arming state.
 *
 * # Safety
 * `mapper` must be live; `state` readable; `channels_out` must hold 16
 * values; `arm_out` may be null.
 */
enum MpStatus mp_mapper_update(struct MpMapper *mapper,
                               const struct MpControllerState *state,
                               bool link_ok,
                               uint16_t *channels_out,
                               enum MpArmMode *arm_out);

/**
 * Creates a simulator from a session config in TOML (null for defaults).
 *
 * # Safety
 * `config_toml` must be null or NUL-terminated; `out` writable.
 */
enum MpStatus mp_sim_new(const char *config_toml, struct MpSim **out);

/**
 * # Safety
 * `sim` must come from [`mp_sim_new`] and not be used afterwards.
 */
void mp_sim_free(struct MpSim *sim);

/**
 * Milliseconds simulated per [`mp_sim_step`].
 *
 * # Safety
 * `sim` must be a live handle.
 */
uint64_t mp_sim_period_ms(const struct MpSim *sim);

/**
 * Advances one controller period. A null `input` means the controller was
 * silent this period, so no packets are sent.
 *
 * # Safety
 * `sim` must be live; `input` null or readable; `out` null or writable.
 */
enum MpStatus mp_sim_step(struct MpSim *sim,
                          const struct MpControllerState *input,
                          struct MpSimState *out);

/**
 * Ends the session if it is still running and writes its JSONL record.
 * The handle stays valid but will not step again.
 *
 * # Safety
 * `sim` must be live; `path` NUL-terminated.
 */
enum MpStatus mp_sim_save_record(struct MpSim *sim, const char *path);

/**
 * Scores UEQ-S answers laid out as `participants` rows of 8 items. With
 * `recode` set, items are on the 1..7 scale and shifted to -3..3 first.
 *
 * # Safety
 * `items` must point to `participants * 8` values; `out` writable.
 */
enum MpStatus mp_ueq_score(const int8_t *items,
                           size_t participants,
                           bool recode,
                           struct MpUeqScales *out);

/**
 * Crate version as a static NUL-terminated string.
 */
const char *mp_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOTIONPILOT_H */
