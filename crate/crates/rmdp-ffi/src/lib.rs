//! C ABI for the rmdp toolkit.

#[no_mangle]
pub extern "C" fn rmdp_abi_version() -> u32 {
    1
}
