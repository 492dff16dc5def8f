/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_websession_free: (a: number, b: number) => void;
export const websession_drive: (a: number, b: number, c: number) => [number, number, number, number];
export const websession_featureCount: () => number;
export const websession_new: (a: number) => [number, number, number];
export const websession_reweight: (a: number, b: number, c: number) => [number, number, number, number];
export const websession_sample: (a: number) => [number, number, number, number];
export const websession_scene: (a: number) => [number, number, number, number];
export const websession_status: (a: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
