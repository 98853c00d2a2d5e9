/* tslint:disable */
/* eslint-disable */

/**
 * A new binary matching round.
 */
export function binary_round(bits: number, count: number, seed: bigint): string;

/**
 * Block titles in curriculum order.
 */
export function curriculum_outline(): string;

/**
 * Reference controller used to seed the editor.
 */
export function example_source(): string;

/**
 * Compiles and grades a controller, returning the trace of rubric scenario
 * number `scenario`.
 */
export function grade_source(source: string, scenario: number): string;

/**
 * Scores a round. `round` is the JSON from [`binary_round`], `matches` a
 * JSON array of `{binary, decimal}`.
 */
export function score_binary(round: string, matches: string, elapsed_secs: number): string;

/**
 * Trains fresh tutor agents on the shipped simulated cohort.
 */
export function train_demo(episodes: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly binary_round: (a: number, b: number, c: bigint) => [number, number];
    readonly curriculum_outline: () => [number, number];
    readonly example_source: () => [number, number];
    readonly grade_source: (a: number, b: number, c: number) => [number, number];
    readonly score_binary: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly train_demo: (a: number, b: bigint) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
