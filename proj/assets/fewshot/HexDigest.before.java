package org.example.digest;

import java.security.MessageDigest;

public class HexDigest {

    public static Boolean isEmpty(byte[] bytes) {
        if (bytes == null || bytes.length == 0) {
            return Boolean.TRUE;
        }
        return Boolean.FALSE;
    }

    public static String toHex(byte[] bytes) {
        StringBuilder sb = new StringBuilder();
        for (byte b : bytes) {
            sb.append(Integer.toHexString(b));
        }
        return sb.toString();
    }
}
