/* tslint:disable */
/* eslint-disable */

export function bound_curve_json(hurst: number, q: number, times: Float64Array, min_pow: number, max_pow: number): string;

/**
 * fBm on `[0, 1]` at `n + 1` grid points: cumulative fGn scaled by `n^{−H}`.
 */
export function fbm_path(hurst: number, n: number, seed: bigint): Float64Array;

export function gaussian_pair_json(dim: number, k: Float64Array, c: Float64Array): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly bound_curve_json: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly fbm_path: (a: number, b: number, c: bigint) => [number, number, number, number];
    readonly gaussian_pair_json: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
