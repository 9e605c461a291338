/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_simulation_free: (a: number, b: number) => void;
export const multiplier_scan: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const near_resonances: (a: number, b: bigint) => [number, number, number, number];
export const simulation_conserved: (a: number) => [number, number, number, number];
export const simulation_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
export const simulation_profiles: (a: number, b: number) => [number, number, number, number];
export const simulation_step: (a: number, b: number) => [number, number];
export const simulation_time: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
