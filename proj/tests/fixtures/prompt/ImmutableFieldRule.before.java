package net.sourceforge.pmd.rules.design;

import java.util.List;

public class ImmutableFieldRule extends AbstractRule {

    private boolean initializedInConstructor(List usages, Set allConstructors) {
        boolean result = false;
        for (Iterator j = usages.iterator(); j.hasNext();) {
            NameOccurrence occurance = (NameOccurrence) j.next();
            if (occurance.isOnLeftHandSide()) {
                SimpleNode node = occurance.getLocation();
                if (node.getFirstParentOfType(ASTConstructorDeclaration.class) != null) {
                    result = true;
                }
            }
        }
        return result;
    }

    private boolean isStatic(ASTFieldDeclaration field) {
        return field.isStatic();
    }
}
