/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const bound_curve_json: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const fbm_path: (a: number, b: number, c: bigint) => [number, number, number, number];
export const gaussian_pair_json: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
