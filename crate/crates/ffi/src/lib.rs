#[no_mangle]
pub extern "C" fn ms_abi_version() -> u32 { 1 }
