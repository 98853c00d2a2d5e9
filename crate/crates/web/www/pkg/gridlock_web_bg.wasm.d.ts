/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const binary_round: (a: number, b: number, c: bigint) => [number, number];
export const curriculum_outline: () => [number, number];
export const example_source: () => [number, number];
export const grade_source: (a: number, b: number, c: number) => [number, number];
export const score_binary: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const train_demo: (a: number, b: bigint) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
