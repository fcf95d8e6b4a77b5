/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const beta_sweep: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
export const no_mixing_curves: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
export const two_response: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
